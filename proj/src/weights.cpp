#include "ulcnn/model.hpp"

#include "bytes.hpp"

namespace ulcnn {

namespace {

constexpr char kMagic[5] = "ULCW";
constexpr uint16_t kVersion = 1;

std::vector<uint32_t> config_fields(const ModelConfig& c) {
  return {static_cast<uint32_t>(c.k),
          static_cast<uint32_t>(c.n_cv),
          static_cast<uint32_t>(c.n_pw),
          static_cast<uint32_t>(c.s_ke),
          static_cast<uint32_t>(c.n_fmdr),
          static_cast<uint32_t>(c.n_classes),
          static_cast<uint32_t>(c.shuffle_groups),
          static_cast<uint32_t>(c.ca_reduction),
          c.use_cv_conv ? 1u : 0u,
          c.use_ca ? 1u : 0u,
          c.use_cs ? 1u : 0u,
          c.use_clff ? 1u : 0u};
}

ModelConfig config_from_fields(const std::vector<uint32_t>& f) {
  ModelConfig c;
  c.k = static_cast<int>(f[0]);
  c.n_cv = static_cast<int>(f[1]);
  c.n_pw = static_cast<int>(f[2]);
  c.s_ke = static_cast<int>(f[3]);
  c.n_fmdr = static_cast<int>(f[4]);
  c.n_classes = static_cast<int>(f[5]);
  c.shuffle_groups = static_cast<int>(f[6]);
  c.ca_reduction = static_cast<int>(f[7]);
  c.use_cv_conv = f[8] != 0;
  c.use_ca = f[9] != 0;
  c.use_cs = f[10] != 0;
  c.use_clff = f[11] != 0;
  return c;
}

std::vector<ParamRef> all_tensors(Model& model) {
  std::vector<ParamRef> refs = model.parameters();
  std::vector<ParamRef> moving = model.moving_statistics();
  refs.insert(refs.end(), moving.begin(), moving.end());
  return refs;
}

}  // namespace

void save_weights(Model& model, const std::filesystem::path& path) {
  model.quantize_storage();

  bytes::FileWriter w(path);
  w.put_bytes(kMagic, 4);
  w.put_u16(kVersion);
  for (uint32_t f : config_fields(model.config())) w.put_u32(f);

  std::vector<ParamRef> refs = all_tensors(model);
  w.put_u32(static_cast<uint32_t>(refs.size()));
  for (const ParamRef& ref : refs) {
    w.put_string(ref.name);
    w.put_u8(0);  // dtype f32
    w.put_u8(static_cast<uint8_t>(ref.value->rank()));
    for (int d : ref.value->shape()) w.put_u32(static_cast<uint32_t>(d));
    for (int64_t i = 0; i < ref.value->size(); ++i) {
      w.put_f32(static_cast<float>((*ref.value)[i]));
    }
  }
  w.finish();
}

namespace {

void read_tensors_into(bytes::FileReader& r, Model& model) {
  std::vector<ParamRef> refs = all_tensors(model);
  const uint32_t count = r.get_u32();
  if (count != refs.size()) {
    fail_data(r.path().string() + ": expected " + std::to_string(refs.size()) +
              " tensors, file has " + std::to_string(count));
  }
  for (ParamRef& ref : refs) {
    const std::string name = r.get_string();
    if (name != ref.name) {
      fail_data(r.path().string() + ": tensor name mismatch, expected '" + ref.name +
                "', file has '" + name + "'");
    }
    const uint8_t dtype = r.get_u8();
    if (dtype != 0) {
      fail_data(r.path().string() + ": unsupported dtype " + std::to_string(dtype) + " for '" +
                name + "'");
    }
    const uint8_t rank = r.get_u8();
    if (rank != ref.value->rank()) {
      fail_data(r.path().string() + ": rank mismatch for '" + name + "'");
    }
    for (int a = 0; a < rank; ++a) {
      const uint32_t d = r.get_u32();
      if (static_cast<int>(d) != ref.value->dim(a)) {
        fail_data(r.path().string() + ": shape mismatch for '" + name + "'");
      }
    }
    for (int64_t i = 0; i < ref.value->size(); ++i) {
      (*ref.value)[i] = static_cast<double>(r.get_f32());
    }
  }
}

ModelConfig read_header(bytes::FileReader& r) {
  r.expect_magic(kMagic);
  const uint16_t version = r.get_u16();
  if (version != kVersion) {
    fail_data(r.path().string() + ": unsupported weight format version " +
              std::to_string(version));
  }
  std::vector<uint32_t> fields(12);
  for (uint32_t& f : fields) f = r.get_u32();
  return config_from_fields(fields);
}

}  // namespace

Model load_model(const std::filesystem::path& path) {
  bytes::FileReader r(path);
  const ModelConfig config = read_header(r);
  config.validate();
  Model model(config, 0);
  read_tensors_into(r, model);
  r.expect_trailer();
  return model;
}

void load_weights_into(Model& model, const std::filesystem::path& path) {
  bytes::FileReader r(path);
  const ModelConfig stored = read_header(r);
  if (stored.n_classes != model.config().n_classes) {
    fail_data(path.string() + ": fc layer is sized for " + std::to_string(stored.n_classes) +
              " classes, model expects " + std::to_string(model.config().n_classes));
  }
  if (!(stored == model.config())) {
    fail_data(path.string() + ": stored config does not match the model");
  }
  read_tensors_into(r, model);
  r.expect_trailer();
}

}  // namespace ulcnn
