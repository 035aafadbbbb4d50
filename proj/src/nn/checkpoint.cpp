#include "mrcp/nn/checkpoint.hpp"

#include "mrcp/binary.hpp"
#include "mrcp/error.hpp"

#include <algorithm>

namespace mrcp::nn {

namespace {

constexpr std::uint16_t kVersion = 1;

void put_arrays(bin::Writer& w, const std::vector<ConstParamRef>& arrays) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.str(a.name);
    w.f64s(a.values);
  }
}

void get_arrays(bin::Reader& r, const std::vector<ParamRef>& arrays) {
  const auto n = r.get<std::uint32_t>();
  if (n != arrays.size()) raise(ErrorKind::FormatError, "checkpoint array count does not match the network");
  for (const auto& a : arrays) {
    const auto name = r.str();
    if (name != a.name) raise(ErrorKind::FormatError, "checkpoint has \"" + name + "\" where \"" + a.name + "\" belongs");
    const auto values = r.f64s();
    if (values.size() != a.values.size()) raise(ErrorKind::FormatError, "checkpoint array " + name + " has wrong size");
    std::copy(values.begin(), values.end(), a.values.begin());
  }
}

}  // namespace

std::string serialize_cnn(const CnnModel& model) {
  bin::Writer w;
  w.raw("MRCN");
  w.put(kVersion);
  const auto& s = model.spec();
  for (auto v : {s.temporal_kernel, s.spatial_kernel, s.depth, s.pool_kernel, s.fc1_units, s.n_classes, s.n_samples}) {
    w.put<std::uint64_t>(v);
  }
  w.put<std::uint64_t>(model.seed());
  w.put(model.bn1.momentum);
  w.put(model.bn1.eps);
  w.put(model.bn2.momentum);
  w.put(model.bn2.eps);
  w.put(model.elu.alpha);
  put_arrays(w, model.parameters());
  put_arrays(w, model.buffers());
  return w.bytes();
}

CnnModel deserialize_cnn(std::string_view bytes) {
  bin::Reader r(bytes, "CNN checkpoint");
  r.expect("MRCN");
  if (r.get<std::uint16_t>() != kVersion) raise(ErrorKind::FormatError, "unsupported CNN checkpoint version");
  CnnSpec s;
  for (auto* v : {&s.temporal_kernel, &s.spatial_kernel, &s.depth, &s.pool_kernel, &s.fc1_units, &s.n_classes,
                  &s.n_samples}) {
    *v = r.get<std::uint64_t>();
  }
  const auto seed = r.get<std::uint64_t>();
  try {
    s.validate();
  } catch (const Error& e) {
    raise(ErrorKind::FormatError, std::string("CNN checkpoint holds an invalid spec: ") + e.what());
  }
  CnnModel m(s, seed);
  m.bn1.momentum = r.get<double>();
  m.bn1.eps = r.get<double>();
  m.bn2.momentum = r.get<double>();
  m.bn2.eps = r.get<double>();
  m.elu.alpha = r.get<double>();
  get_arrays(r, m.parameters());
  get_arrays(r, m.buffers());
  r.finish();
  return m;
}

void save_cnn(const CnnModel& model, const std::filesystem::path& path) {
  bin::write_file_atomic(path, serialize_cnn(model));
}

CnnModel load_cnn(const std::filesystem::path& path) { return deserialize_cnn(bin::read_file(path)); }

}  // namespace mrcp::nn
