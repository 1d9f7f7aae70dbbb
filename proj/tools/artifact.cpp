#include "artifact.hpp"

#include <fstream>

#include <json.hpp>

#include "dexreg/error.hpp"

namespace dexreg::cli {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat(const Eigen::MatrixXd& m) {
  std::vector<double> rowmajor;
  rowmajor.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) rowmajor.push_back(m(i, k));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", rowmajor}};
}

Eigen::MatrixXd to_mat(const json& j) {
  const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  const auto v = j.at("values").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != r * c) throw FormatError("matrix size does not match its shape");
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = v[static_cast<std::size_t>(i * c + k)];
  return m;
}

json basis(const SmoothBasis& b) {
  return {{"w", mat(b.w_matrix)},
          {"eigenvectors", mat(b.eigenvectors)},
          {"eigenvalues", vec(b.eigenvalues)},
          {"total_trace", b.total_trace},
          {"energy", b.energy}};
}

SmoothBasis to_basis(const json& j) {
  SmoothBasis b;
  b.w_matrix = to_mat(j.at("w"));
  b.eigenvectors = to_mat(j.at("eigenvectors"));
  b.eigenvalues = to_vec(j.at("eigenvalues"));
  b.total_trace = j.at("total_trace").get<double>();
  b.energy = j.at("energy").get<double>();
  return b;
}

json vecs(const std::vector<Eigen::VectorXd>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(vec(x));
  return out;
}

std::vector<Eigen::VectorXd> to_vecs(const json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& x : j) out.push_back(to_vec(x));
  return out;
}

json state(const ModelState& s) {
  return {{"beta0_mu", s.beta0_mu},       {"beta_mu", vec(s.beta_mu)},       {"J_mu", s.J_mu},
          {"b_mu", s.b_mu},               {"alpha_mu", vecs(s.alpha_mu)},    {"c_mu", vec(s.c_mu)},
          {"K_mu", s.K_mu},               {"ac_mu", s.ac_mu},                {"bc_mu", s.bc_mu},
          {"beta_theta", vec(s.beta_theta)}, {"J_theta", s.J_theta},        {"b_theta", s.b_theta},
          {"alpha_theta", vecs(s.alpha_theta)}, {"c_theta", vec(s.c_theta)}, {"K_theta", s.K_theta},
          {"ac_theta", s.ac_theta},       {"bc_theta", s.bc_theta},          {"alpha_int", vecs(s.alpha_int)},
          {"c_int", vec(s.c_int)},        {"K_int", s.K_int}};
}

ModelState to_state(const json& j) {
  ModelState s;
  s.beta0_mu = j.at("beta0_mu").get<double>();
  s.beta_mu = to_vec(j.at("beta_mu"));
  s.J_mu = j.at("J_mu").get<std::vector<std::uint8_t>>();
  s.b_mu = j.at("b_mu").get<double>();
  s.alpha_mu = to_vecs(j.at("alpha_mu"));
  s.c_mu = to_vec(j.at("c_mu"));
  s.K_mu = j.at("K_mu").get<std::vector<std::uint8_t>>();
  s.ac_mu = j.at("ac_mu").get<double>();
  s.bc_mu = j.at("bc_mu").get<double>();
  s.beta_theta = to_vec(j.at("beta_theta"));
  s.J_theta = j.at("J_theta").get<std::uint8_t>();
  s.b_theta = j.at("b_theta").get<double>();
  s.alpha_theta = to_vecs(j.at("alpha_theta"));
  s.c_theta = to_vec(j.at("c_theta"));
  s.K_theta = j.at("K_theta").get<std::vector<std::uint8_t>>();
  s.ac_theta = j.at("ac_theta").get<double>();
  s.bc_theta = j.at("bc_theta").get<double>();
  s.alpha_int = to_vecs(j.at("alpha_int"));
  s.c_int = to_vec(j.at("c_int"));
  s.K_int = j.at("K_int").get<std::vector<std::uint8_t>>();
  return s;
}

}  // namespace

void save_artifact(const std::filesystem::path& path, const FitArtifact& fit) {
  const Dataset& d = fit.data;
  json covs = json::array();
  for (std::size_t j = 0; j < d.p(); ++j) {
    const auto& c = d.covariates[j];
    covs.push_back({{"name", fit.covariate_names[j]},
                    {"raw", c.raw},
                    {"mean", c.mean},
                    {"sd", c.sd},
                    {"min", c.min},
                    {"max", c.max},
                    {"basis", basis(d.bases[j])}});
  }
  json pairs = json::array();
  for (const auto& ib : d.interactions) pairs.push_back({{"j", ib.j}, {"k", ib.k}, {"basis", basis(ib.basis)}});
  std::vector<double> weights;
  for (Weight w : d.weights) weights.push_back(w.a);
  json states = json::array();
  for (const auto& s : fit.chain.states) states.push_back(state(s));
  json stats = json::object();
  for (std::size_t k = 0; k < kStepCount; ++k) {
    const auto& st = fit.chain.stats[k];
    stats[std::string(step_name(static_cast<Step>(k)))] = {
        {"proposed", st.proposed}, {"accepted", st.accepted}, {"skipped", st.skipped}};
  }
  const json doc{{"format", kFitFormat},
                 {"version", kFitVersion},
                 {"config", fit.config.entries()},
                 {"family", family_name(d.family.id)},
                 {"phi", d.family.phi},
                 {"response", d.y},
                 {"weights", weights},
                 {"covariates", covs},
                 {"interactions", pairs},
                 {"chain",
                  {{"iterations", fit.chain.iterations},
                   {"log_likelihood", fit.chain.log_likelihood},
                   {"states", states},
                   {"stats", stats}}}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FitArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    const json doc = json::parse(in);
    if (doc.at("format").get<std::string>() != kFitFormat) throw FormatError(path.string() + " is not a fit artifact");
    if (doc.at("version").get<int>() != kFitVersion)
      throw FormatError(path.string() + ": unsupported fit format version " + doc.at("version").dump());
    FitArtifact fit;
    for (const auto& [k, v] : doc.at("config").items()) fit.config.set(k, v.get<std::string>());
    ExponentialFamily fam{parse_family(doc.at("family").get<std::string>()), doc.at("phi").get<double>()};
    std::vector<Weight> weights;
    for (double a : doc.at("weights").get<std::vector<double>>()) weights.push_back(Weight{a});
    std::vector<RescaledCovariate> covs;
    std::vector<SmoothBasis> bases;
    for (const auto& c : doc.at("covariates")) {
      fit.covariate_names.push_back(c.at("name").get<std::string>());
      const auto raw = c.at("raw").get<std::vector<double>>();
      covs.push_back(RescaledCovariate::from_maps(raw, c.at("mean").get<double>(), c.at("sd").get<double>(),
                                                  c.at("min").get<double>(), c.at("max").get<double>()));
      bases.push_back(to_basis(c.at("basis")));
    }
    std::vector<InteractionBasis> pairs;
    for (const auto& ib : doc.at("interactions"))
      pairs.push_back({ib.at("j").get<std::size_t>(), ib.at("k").get<std::size_t>(), to_basis(ib.at("basis"))});
    fit.data = Dataset::assemble(fam, doc.at("response").get<std::vector<double>>(), std::move(weights),
                                 std::move(covs), std::move(bases), std::move(pairs));
    const auto& ch = doc.at("chain");
    fit.chain.iterations = ch.at("iterations").get<std::vector<std::size_t>>();
    fit.chain.log_likelihood = ch.at("log_likelihood").get<std::vector<double>>();
    for (const auto& s : ch.at("states")) fit.chain.states.push_back(to_state(s));
    for (std::size_t k = 0; k < kStepCount; ++k) {
      const auto& st = ch.at("stats").at(std::string(step_name(static_cast<Step>(k))));
      fit.chain.stats[k] = {st.at("proposed").get<std::size_t>(), st.at("accepted").get<std::size_t>(),
                            st.at("skipped").get<std::size_t>()};
    }
    if (fit.chain.states.size() != fit.chain.iterations.size() ||
        fit.chain.states.size() != fit.chain.log_likelihood.size())
      throw FormatError(path.string() + ": chain arrays differ in length");
    for (const auto& s : fit.chain.states) check_invariants(s, fit.data, fit.config.structure());
    return fit;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed fit artifact: " + e.what());
  } catch (const InvariantError& e) {
    throw FormatError(path.string() + ": chain state is inconsistent: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": bad configuration snapshot: " + e.what());
  }
}

}  // namespace dexreg::cli
