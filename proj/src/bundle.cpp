#include "cirloc/bundle.hpp"

#include "cirloc/errors.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <fstream>

namespace cirloc {

namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic = {'C', 'L', 'B', '1'};
constexpr std::array<char, 4> kTag1D = {'G', '1', 'D', ' '};
constexpr std::array<char, 4> kTagMD = {'G', 'M', 'D', ' '};
constexpr std::array<char, 4> kTagSvc = {'S', 'V', 'C', ' '};

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    os.put(static_cast<char>(bits & 0xFF));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::make_unsigned_t<T>;
  std::array<unsigned char, sizeof(T)> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), sizeof(T))) {
    throw FormatError("model bundle truncated");
  }
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = static_cast<U>((bits << 8) | buf[i]);
  return static_cast<T>(bits);
}

struct Section {
  std::array<char, 4> tag{};
  json header;
  std::vector<double> payload;
};

/// Sequential reader over a section payload.
class Cursor {
 public:
  explicit Cursor(const std::vector<double>& v) : v_(v) {}
  double next() {
    if (pos_ >= v_.size()) throw FormatError("model bundle payload too short");
    return v_[pos_++];
  }
  Vector vector(Eigen::Index n) {
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = next();
    return out;
  }
  Matrix matrix(Eigen::Index n) {
    Matrix out(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) out(r, c) = next();
    return out;
  }
  bool done() const { return pos_ == v_.size(); }

 private:
  const std::vector<double>& v_;
  std::size_t pos_ = 0;
};

json fit_config_json(const FitConfig& c) {
  return {{"max_components", c.max_components},
          {"max_iter", c.max_iter},
          {"tol", c.tol},
          {"weight_concentration_prior", c.weight_concentration_prior},
          {"reg_covar", c.reg_covar},
          {"n_init", c.n_init},
          {"seed", c.seed},
          {"covariance_type", "full"}};
}

FitConfig fit_config_from(const json& j) {
  FitConfig c;
  c.max_components = j.at("max_components").get<int>();
  c.max_iter = j.at("max_iter").get<int>();
  c.tol = j.at("tol").get<double>();
  c.weight_concentration_prior = j.at("weight_concentration_prior").get<double>();
  c.reg_covar = j.at("reg_covar").get<double>();
  c.n_init = j.at("n_init").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json area_ids(const std::vector<AreaId>& areas) {
  json out = json::array();
  for (const AreaId a : areas) out.push_back(a.id);
  return out;
}

std::vector<AreaId> area_ids_from(const json& j) {
  std::vector<AreaId> out;
  for (const auto& v : j) out.emplace_back(v.get<int>());
  return out;
}

void append_model(const GmmModel& m, std::vector<double>& out, json& meta) {
  meta = {{"components", m.size()},
          {"converged", m.converged()},
          {"n_iter", m.n_iter()}};
  for (const auto& c : m.components()) {
    out.push_back(c.weight);
    out.insert(out.end(), c.mean.data(), c.mean.data() + c.mean.size());
    for (Eigen::Index r = 0; r < c.covariance.rows(); ++r)
      for (Eigen::Index col = 0; col < c.covariance.cols(); ++col)
        out.push_back(c.covariance(r, col));
  }
}

GmmModel read_model(Cursor& cur, const json& meta, Eigen::Index dim) {
  const auto k = meta.at("components").get<std::size_t>();
  std::vector<double> w;
  std::vector<Vector> mu;
  std::vector<Matrix> cov;
  for (std::size_t i = 0; i < k; ++i) {
    w.push_back(cur.next());
    mu.push_back(cur.vector(dim));
    cov.push_back(cur.matrix(dim));
  }
  return GmmModel::restore(w, mu, cov, meta.at("converged").get<bool>(),
                           meta.at("n_iter").get<int>());
}

Section section_1d(const AreaModelSet1D& set, const FitConfig& cfg) {
  Section s{kTag1D, {}, {}};
  json models = json::array();
  for (const auto& area : set.models) {
    json row = json::array();
    for (const auto& m : area) {
      json meta;
      append_model(m, s.payload, meta);
      row.push_back(meta);
    }
    models.push_back(row);
  }
  s.header = {{"kind", "gmm_1d"},
              {"areas", area_ids(set.areas)},
              {"bins", set.bins()},
              {"dim", 1},
              {"config", fit_config_json(cfg)},
              {"models", models}};
  return s;
}

Section section_md(const AreaModelSetMD& set, const FitConfig& cfg) {
  Section s{kTagMD, {}, {}};
  json models = json::array();
  for (const auto& m : set.models) {
    json meta;
    append_model(m, s.payload, meta);
    models.push_back(meta);
  }
  s.header = {{"kind", "gmm_md"},
              {"areas", area_ids(set.areas)},
              {"dim", set.dim()},
              {"config", fit_config_json(cfg)},
              {"models", models}};
  return s;
}

Section section_svc(const SvcModel& model, int window) {
  Section s{kTagSvc, {}, {}};
  json machines = json::array();
  for (const auto& m : model.machines) {
    machines.push_back({{"positive", m.positive.id},
                        {"negative", m.negative.id},
                        {"n_support", m.support.size()},
                        {"bias", m.bias},
                        {"iterations", m.iterations},
                        {"converged", m.converged}});
    for (const auto& sv : m.support)
      s.payload.insert(s.payload.end(), sv.data(), sv.data() + sv.size());
    s.payload.insert(s.payload.end(), m.coef.begin(), m.coef.end());
  }
  const auto& c = model.config;
  s.header = {{"kind", "svc"},
              {"classes", area_ids(model.classes)},
              {"gamma", model.gamma},
              {"dim", model.dim},
              {"window", window},
              {"config",
               {{"c_penalty", c.c_penalty},
                {"gamma_mode", c.gamma_mode == GammaMode::scale ? "scale" : "fixed"},
                {"gamma_value", c.gamma_value},
                {"max_iter", c.max_iter},
                {"tol", c.tol},
                {"seed", c.seed},
                {"iteration_unit", "smo_pair_update"}}},
              {"machines", machines}};
  return s;
}

SvcModel svc_from(const Section& s, int& window) {
  const auto& h = s.header;
  SvcModel model;
  model.classes = area_ids_from(h.at("classes"));
  model.gamma = h.at("gamma").get<double>();
  model.dim = h.at("dim").get<int>();
  window = h.at("window").get<int>();
  const auto& c = h.at("config");
  model.config.c_penalty = c.at("c_penalty").get<double>();
  model.config.gamma_mode =
      c.at("gamma_mode").get<std::string>() == "scale" ? GammaMode::scale : GammaMode::fixed;
  model.config.gamma_value = c.at("gamma_value").get<double>();
  model.config.max_iter = c.at("max_iter").get<int>();
  model.config.tol = c.at("tol").get<double>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  Cursor cur(s.payload);
  for (const auto& mj : h.at("machines")) {
    BinaryMachine m;
    m.positive = AreaId(mj.at("positive").get<int>());
    m.negative = AreaId(mj.at("negative").get<int>());
    m.bias = mj.at("bias").get<double>();
    m.iterations = mj.at("iterations").get<int>();
    m.converged = mj.at("converged").get<bool>();
    const auto n = mj.at("n_support").get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) m.support.push_back(cur.vector(model.dim));
    for (std::size_t i = 0; i < n; ++i) m.coef.push_back(cur.next());
    model.machines.push_back(std::move(m));
  }
  if (!cur.done()) throw FormatError("SVC section has trailing data");
  return model;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::vector<Section> sections;
  if (bundle.gmm_1d) sections.push_back(section_1d(*bundle.gmm_1d, bundle.fit_1d));
  if (bundle.gmm_md) sections.push_back(section_md(*bundle.gmm_md, bundle.fit_md));
  if (bundle.svc) sections.push_back(section_svc(*bundle.svc, bundle.svc_window));

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    os.write(s.tag.data(), s.tag.size());
    const std::string text = s.header.dump();
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_le<std::uint64_t>(os, s.payload.size());
    for (double v : s.payload) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("'" + path.string() + "' is not a model bundle");
  }
  ModelBundle bundle;
  const auto count = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    Section s;
    if (!is.read(s.tag.data(), s.tag.size())) throw FormatError("model bundle truncated");
    const auto len = get_le<std::uint32_t>(is);
    std::string text(len, '\0');
    if (!is.read(text.data(), len)) throw FormatError("model bundle truncated");
    try {
      s.header = json::parse(text);
    } catch (const json::exception& e) {
      throw FormatError(std::string("model bundle header: ") + e.what());
    }
    const auto n = get_le<std::uint64_t>(is);
    s.payload.resize(n);
    for (auto& v : s.payload) v = std::bit_cast<double>(get_le<std::uint64_t>(is));

    try {
      if (s.tag == kTag1D) {
        AreaModelSet1D set;
        set.areas = area_ids_from(s.header.at("areas"));
        bundle.fit_1d = fit_config_from(s.header.at("config"));
        Cursor cur(s.payload);
        for (const auto& row : s.header.at("models")) {
          std::vector<GmmModel> bins;
          for (const auto& meta : row) bins.push_back(read_model(cur, meta, 1));
          set.models.push_back(std::move(bins));
        }
        if (!cur.done()) throw FormatError("G1D section has trailing data");
        bundle.gmm_1d = std::move(set);
      } else if (s.tag == kTagMD) {
        AreaModelSetMD set;
        set.areas = area_ids_from(s.header.at("areas"));
        bundle.fit_md = fit_config_from(s.header.at("config"));
        const auto dim = s.header.at("dim").get<Eigen::Index>();
        Cursor cur(s.payload);
        for (const auto& meta : s.header.at("models")) {
          set.models.push_back(read_model(cur, meta, dim));
        }
        if (!cur.done()) throw FormatError("GMD section has trailing data");
        bundle.gmm_md = std::move(set);
      } else if (s.tag == kTagSvc) {
        bundle.svc = svc_from(s, bundle.svc_window);
      } else {
        throw FormatError("unknown bundle section '" +
                          std::string(s.tag.begin(), s.tag.end()) + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("model bundle header: ") + e.what());
    } catch (const ArgumentError& e) {
      throw FormatError(std::string("model bundle: ") + e.what());
    }
  }
  return bundle;
}

}  // namespace cirloc
