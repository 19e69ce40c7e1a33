#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "pmd/dataset_io.hpp"
#include "pmd/diagnostics.hpp"
#include "pmd/mirror_descent.hpp"
#include "pmd/sgld.hpp"
#include "pmd/synthetic.hpp"
#include "pmd/trace_io.hpp"

namespace pmd {

struct ModelSpec {
  std::string kind = "conjugate_gaussian";  // conjugate_gaussian | tied_mixture | logistic
  Vector prior_mean = Vector::Zero(1);
  double prior_var = 1.0;
  double obs_var = 1.0;
  TiedMixtureParams mixture;
};

struct DataSpec {
  std::string source = "synthetic";  // synthetic | csv
  std::string path;
  bool has_labels = false;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  Vector truth;
};

struct DiagnosticsSpec {
  /// Explicit grid; empty means derive it with auto_axes from `search`.
  std::vector<Axis> grid;
  std::vector<Axis> search;
  std::size_t grid_points = 200;
  /// Fraction of the data held out for predictive accuracy (models with d > 2).
  double holdout = 0.2;
};

/// One experiment: model, data, algorithm and diagnostics. Iteration counts may
/// be given as passes over the data and are resolved once N is known.
struct ExperimentConfig {
  std::string algorithm = "pmd";  // pmd | sgld
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  ModelSpec model;
  DataSpec data;
  PmdConfig pmd;
  std::optional<double> pmd_passes;
  SgldConfig sgld;
  std::optional<double> sgld_passes;
  DiagnosticsSpec diagnostics;
};

namespace detail {

using boost::property_tree::ptree;

inline Vector parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto f = trim(field);
    if (f.empty()) continue;
    try {
      values.push_back(std::stod(std::string(f)));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse, "not a number: '" + std::string(f) + "'");
    }
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
  return os.str();
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline Axis parse_axis(const std::string& text) {
  const Vector v = parse_vector(text);
  if (v.size() != 3 || v(2) < 2) throw Error(ErrorKind::Parse, "axis must be 'lo,hi,n': '" + text + "'");
  return {v(0), v(1), static_cast<std::size_t>(v(2))};
}

inline std::string format_axis(const Axis& a) {
  return format_double(a.lo) + "," + format_double(a.hi) + "," + std::to_string(a.n);
}

template <class T>
T get(const ptree& pt, const std::string& key, T fallback) {
  const auto raw = pt.get_optional<std::string>(key);
  if (!raw) return fallback;
  const auto value = pt.get_optional<T>(key);
  if (!value) throw Error(ErrorKind::Parse, "bad value for '" + key + "': '" + *raw + "'");
  return *value;
}

inline bool get_bool(const ptree& pt, const std::string& key, bool fallback) {
  const std::string v = pt.get<std::string>(key, fallback ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::Parse, "bad boolean for '" + key + "': " + v);
}

inline std::vector<Axis> get_axes(const ptree& pt, const std::string& prefix) {
  std::vector<Axis> out;
  for (int i = 1; i <= 2; ++i) {
    const auto v = pt.get_optional<std::string>(prefix + std::to_string(i));
    if (!v) break;
    out.push_back(parse_axis(*v));
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& is) {
  using detail::get;
  detail::ptree pt;
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  ExperimentConfig c;
  c.algorithm = get<std::string>(pt, "experiment.algorithm", c.algorithm);
  c.seed = get<std::uint64_t>(pt, "experiment.seed", c.seed);
  c.output_dir = get<std::string>(pt, "experiment.output_dir", c.output_dir);
  if (c.algorithm != "pmd" && c.algorithm != "sgld") throw Error(ErrorKind::Parse, "unknown algorithm '" + c.algorithm + "'");

  auto& m = c.model;
  m.kind = get<std::string>(pt, "model.kind", m.kind);
  if (auto v = pt.get_optional<std::string>("model.prior_mean")) m.prior_mean = detail::parse_vector(*v);
  m.prior_var = get(pt, "model.prior_var", m.prior_var);
  m.obs_var = get(pt, "model.obs_var", m.obs_var);
  m.mixture.sigma1 = get(pt, "model.sigma1", m.mixture.sigma1);
  m.mixture.sigma2 = get(pt, "model.sigma2", m.mixture.sigma2);
  m.mixture.sigma_x = get(pt, "model.sigma_x", m.mixture.sigma_x);
  m.mixture.mix_p = get(pt, "model.mix_p", m.mixture.mix_p);
  if (m.kind != "conjugate_gaussian" && m.kind != "tied_mixture" && m.kind != "logistic")
    throw Error(ErrorKind::Parse, "unknown model kind '" + m.kind + "'");

  auto& d = c.data;
  d.source = get<std::string>(pt, "data.source", d.source);
  d.path = get<std::string>(pt, "data.path", d.path);
  d.has_labels = detail::get_bool(pt, "data.labels", m.kind == "logistic");
  d.n = get<std::size_t>(pt, "data.n", d.n);
  d.seed = get<std::uint64_t>(pt, "data.seed", d.seed);
  if (auto v = pt.get_optional<std::string>("data.truth")) d.truth = detail::parse_vector(*v);
  if (d.source != "synthetic" && d.source != "csv") throw Error(ErrorKind::Parse, "unknown data source '" + d.source + "'");

  auto& p = c.pmd;
  const std::string strategy = get<std::string>(pt, "pmd.strategy", "weighted_kde");
  if (strategy == "weighted_kde") p.strategy = Strategy::WeightedKde;
  else if (strategy == "weighted_particles") p.strategy = Strategy::WeightedParticles;
  else if (strategy == "switch_at") p.strategy = Strategy::SwitchAt;
  else throw Error(ErrorKind::Parse, "unknown strategy '" + strategy + "'");
  p.t_switch = get<std::size_t>(pt, "pmd.t_switch", p.t_switch);
  p.batch_size = get<std::size_t>(pt, "pmd.batch_size", p.batch_size);
  p.iterations = get<std::size_t>(pt, "pmd.iterations", p.iterations);
  if (pt.get_optional<std::string>("pmd.passes")) c.pmd_passes = get(pt, "pmd.passes", 0.0);
  const std::string step = get<std::string>(pt, "pmd.step", "eta_over_t");
  if (step == "eta_over_t") {
    p.step = EtaOverT{get(pt, "pmd.eta", 1.0)};
  } else if (step == "capped_harmonic") {
    p.step = CappedHarmonic{get(pt, "pmd.grad_bound", 10.0), get(pt, "pmd.density_floor", 1.0), get(pt, "pmd.step_beta", 2.0)};
  } else if (step == "eta_over_offset_power") {
    p.step = EtaOverOffsetPower{get(pt, "pmd.eta", 1.0), get(pt, "pmd.offset", 0.0), get(pt, "pmd.kappa", 1.0)};
  } else {
    throw Error(ErrorKind::Parse, "unknown step schedule '" + step + "'");
  }
  const std::string particles = get<std::string>(pt, "pmd.particles", "fixed");
  if (particles == "fixed") p.particles = FixedCount{get<std::size_t>(pt, "pmd.m", 1000)};
  else if (particles == "linear") p.particles = LinearCount{get<std::size_t>(pt, "pmd.m0", 100)};
  else if (particles == "power") p.particles = PowerCount{get(pt, "pmd.m0", 100.0), get(pt, "pmd.exponent", 1.0)};
  else throw Error(ErrorKind::Parse, "unknown particle schedule '" + particles + "'");
  p.bandwidth.beta = get(pt, "pmd.bandwidth_beta", p.bandwidth.beta);
  const std::string scale = get<std::string>(pt, "pmd.bandwidth_scale", "median");
  if (scale != "median") p.bandwidth.scale = detail::parse_vector(scale)(0);
  p.bandwidth.median_factor = get(pt, "pmd.median_factor", p.bandwidth.median_factor);
  p.bandwidth.standardize = detail::get_bool(pt, "pmd.standardize", p.bandwidth.standardize);
  const std::string sampling = get<std::string>(pt, "pmd.sampling", "with_replacement");
  if (sampling == "with_replacement") p.sampling = BatchSampling::WithReplacement;
  else if (sampling == "epoch") p.sampling = BatchSampling::Epoch;
  else throw Error(ErrorKind::Parse, "unknown batch sampling '" + sampling + "'");
  const std::string resampling = get<std::string>(pt, "pmd.resampling", "systematic");
  if (resampling == "systematic") p.resampling = Resampling::Systematic;
  else if (resampling == "multinomial") p.resampling = Resampling::Multinomial;
  else throw Error(ErrorKind::Parse, "unknown resampling '" + resampling + "'");
  if (auto v = pt.get_optional<std::string>("pmd.records"))
    for (double t : detail::parse_vector(*v)) p.extra_records.insert(static_cast<std::size_t>(t));

  auto& s = c.sgld;
  s.step_a = get(pt, "sgld.a", s.step_a);
  s.step_b = get(pt, "sgld.b", s.step_b);
  s.step_kappa = get(pt, "sgld.kappa", s.step_kappa);
  s.batch_size = get<std::size_t>(pt, "sgld.batch_size", s.batch_size);
  s.iterations = get<std::size_t>(pt, "sgld.iterations", s.iterations);
  if (pt.get_optional<std::string>("sgld.passes")) c.sgld_passes = get(pt, "sgld.passes", 0.0);
  s.burn_in = get<std::size_t>(pt, "sgld.burn_in", s.burn_in);
  s.thin = get<std::size_t>(pt, "sgld.thin", s.thin);

  auto& g = c.diagnostics;
  g.grid = detail::get_axes(pt, "diagnostics.axis");
  g.search = detail::get_axes(pt, "diagnostics.search");
  g.grid_points = get<std::size_t>(pt, "diagnostics.grid_points", g.grid_points);
  g.holdout = get(pt, "diagnostics.holdout", g.holdout);
  if (!(g.holdout >= 0.0 && g.holdout < 1.0)) throw Error(ErrorKind::Parse, "holdout must lie in [0, 1)");
  return c;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open config " + path);
  return parse_config(is);
}

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::format_double;
  detail::ptree pt;
  pt.put("experiment.algorithm", c.algorithm);
  pt.put("experiment.seed", c.seed);
  pt.put("experiment.output_dir", c.output_dir);

  pt.put("model.kind", c.model.kind);
  pt.put("model.prior_mean", detail::format_vector(c.model.prior_mean));
  pt.put("model.prior_var", format_double(c.model.prior_var));
  pt.put("model.obs_var", format_double(c.model.obs_var));
  pt.put("model.sigma1", format_double(c.model.mixture.sigma1));
  pt.put("model.sigma2", format_double(c.model.mixture.sigma2));
  pt.put("model.sigma_x", format_double(c.model.mixture.sigma_x));
  pt.put("model.mix_p", format_double(c.model.mixture.mix_p));

  pt.put("data.source", c.data.source);
  if (!c.data.path.empty()) pt.put("data.path", c.data.path);
  pt.put("data.labels", c.data.has_labels ? "true" : "false");
  pt.put("data.n", c.data.n);
  pt.put("data.seed", c.data.seed);
  if (c.data.truth.size() > 0) pt.put("data.truth", detail::format_vector(c.data.truth));

  const auto& p = c.pmd;
  pt.put("pmd.strategy", p.strategy == Strategy::WeightedKde         ? "weighted_kde"
                         : p.strategy == Strategy::WeightedParticles ? "weighted_particles"
                                                                     : "switch_at");
  pt.put("pmd.t_switch", p.t_switch);
  pt.put("pmd.batch_size", p.batch_size);
  if (c.pmd_passes) pt.put("pmd.passes", format_double(*c.pmd_passes));
  else pt.put("pmd.iterations", p.iterations);
  if (const auto* s = std::get_if<EtaOverT>(&p.step)) {
    pt.put("pmd.step", "eta_over_t");
    pt.put("pmd.eta", format_double(s->eta));
  } else if (const auto* f = std::get_if<CappedHarmonic>(&p.step)) {
    pt.put("pmd.step", "capped_harmonic");
    pt.put("pmd.grad_bound", format_double(f->grad_bound));
    pt.put("pmd.density_floor", format_double(f->density_floor));
    pt.put("pmd.step_beta", format_double(f->beta));
  } else {
    const auto& o = std::get<EtaOverOffsetPower>(p.step);
    pt.put("pmd.step", "eta_over_offset_power");
    pt.put("pmd.eta", format_double(o.eta));
    pt.put("pmd.offset", format_double(o.offset));
    pt.put("pmd.kappa", format_double(o.kappa));
  }
  if (const auto* f = std::get_if<FixedCount>(&p.particles)) {
    pt.put("pmd.particles", "fixed");
    pt.put("pmd.m", f->m);
  } else if (const auto* l = std::get_if<LinearCount>(&p.particles)) {
    pt.put("pmd.particles", "linear");
    pt.put("pmd.m0", l->m0);
  } else {
    const auto& w = std::get<PowerCount>(p.particles);
    pt.put("pmd.particles", "power");
    pt.put("pmd.m0", format_double(w.m0));
    pt.put("pmd.exponent", format_double(w.exponent));
  }
  pt.put("pmd.bandwidth_beta", format_double(p.bandwidth.beta));
  pt.put("pmd.bandwidth_scale", p.bandwidth.scale ? format_double(*p.bandwidth.scale) : std::string("median"));
  pt.put("pmd.median_factor", format_double(p.bandwidth.median_factor));
  pt.put("pmd.standardize", p.bandwidth.standardize ? "true" : "false");
  pt.put("pmd.sampling", p.sampling == BatchSampling::Epoch ? "epoch" : "with_replacement");
  pt.put("pmd.resampling", p.resampling == Resampling::Systematic ? "systematic" : "multinomial");
  if (!p.extra_records.empty()) {
    std::string rec;
    for (auto t : p.extra_records) rec += (rec.empty() ? "" : ",") + std::to_string(t);
    pt.put("pmd.records", rec);
  }

  const auto& s = c.sgld;
  pt.put("sgld.a", format_double(s.step_a));
  pt.put("sgld.b", format_double(s.step_b));
  pt.put("sgld.kappa", format_double(s.step_kappa));
  pt.put("sgld.batch_size", s.batch_size);
  if (c.sgld_passes) pt.put("sgld.passes", format_double(*c.sgld_passes));
  else pt.put("sgld.iterations", s.iterations);
  pt.put("sgld.burn_in", s.burn_in);
  pt.put("sgld.thin", s.thin);

  const auto& g = c.diagnostics;
  for (std::size_t i = 0; i < g.grid.size(); ++i) pt.put("diagnostics.axis" + std::to_string(i + 1), detail::format_axis(g.grid[i]));
  for (std::size_t i = 0; i < g.search.size(); ++i)
    pt.put("diagnostics.search" + std::to_string(i + 1), detail::format_axis(g.search[i]));
  pt.put("diagnostics.grid_points", g.grid_points);
  pt.put("diagnostics.holdout", format_double(g.holdout));

  std::ostringstream os;
  boost::property_tree::write_ini(os, pt);
  return os.str();
}

/// Dataset named by the config: CSV file or synthetic forward-model draw.
inline Dataset load_experiment_data(const ExperimentConfig& c) {
  if (c.data.source == "csv") return load_dataset(c.data.path, c.data.has_labels);
  SyntheticParams sp;
  sp.truth = c.data.truth;
  sp.mixture = c.model.mixture;
  sp.obs_var = c.model.obs_var;
  return generate_synthetic(c.model.kind, sp, c.data.seed, c.data.n);
}

struct PreparedExperiment {
  ExperimentConfig config;  // iteration counts resolved
  ModelPtr model;
  Dataset test;  // empty unless a holdout is used
  bool grid_metrics = false;
};

inline std::size_t passes_to_iterations(double passes, std::size_t n, std::size_t batch) {
  const double iters = std::ceil(passes * static_cast<double>(n) / static_cast<double>(batch));
  return std::max<std::size_t>(1, static_cast<std::size_t>(iters));
}

/// Loads data, builds the model and validates every algorithm setting against
/// it. No inference work happens here.
inline PreparedExperiment prepare_experiment(const ExperimentConfig& config) {
  PreparedExperiment out;
  out.config = config;
  auto& c = out.config;
  Dataset data = load_experiment_data(c);

  const bool high_dim = c.model.kind == "logistic";
  if (high_dim && c.diagnostics.holdout > 0.0) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto n_test = static_cast<Eigen::Index>(std::floor(c.diagnostics.holdout * static_cast<double>(n)));
    if (n_test >= 1 && n_test < n) {
      out.test.has_labels = data.has_labels;
      out.test.points = data.points.bottomRows(n_test);
      Matrix train = data.points.topRows(n - n_test);
      data.points = std::move(train);
    }
  }

  if (c.model.kind == "conjugate_gaussian") {
    out.model = make_conjugate_gaussian(c.model.prior_mean, c.model.prior_var, c.model.obs_var, std::move(data));
  } else if (c.model.kind == "tied_mixture") {
    const auto& mx = c.model.mixture;
    out.model = make_tied_mixture(mx.sigma1, mx.sigma2, mx.sigma_x, mx.mix_p, std::move(data));
  } else {
    out.model = make_logistic(std::move(data), c.model.prior_var);
  }
  const std::size_t n = out.model->data_size();
  if (c.pmd_passes) c.pmd.iterations = passes_to_iterations(*c.pmd_passes, n, std::max<std::size_t>(1, c.pmd.batch_size));
  if (c.sgld_passes) c.sgld.iterations = passes_to_iterations(*c.sgld_passes, n, std::max<std::size_t>(1, c.sgld.batch_size));
  c.pmd.rng_seed = c.seed;
  c.sgld.rng_seed = c.seed;
  if (c.algorithm == "pmd") validate(c.pmd, *out.model);
  else validate(c.sgld, *out.model);
  out.grid_metrics = out.model->dim() <= 2 && !high_dim;
  return out;
}

inline GridOracle experiment_oracle(const PreparedExperiment& prep) {
  const auto& g = prep.config.diagnostics;
  if (!g.grid.empty()) return build_grid_oracle(*prep.model, g.grid);
  std::vector<Axis> search = g.search;
  if (search.empty()) {
    Rng rng = make_rng(prep.config.seed, 0x9e1d);
    const Matrix draws = prep.model->sample_prior(rng, 2000);
    const Vector mean = draws.colwise().mean().transpose();
    const Vector sd = weighted_std(draws, Vector::Constant(draws.rows(), 1.0 / static_cast<double>(draws.rows())));
    for (std::size_t a = 0; a < prep.model->dim(); ++a) {
      const auto j = static_cast<Eigen::Index>(a);
      search.push_back({mean(j) - 8.0 * sd(j), mean(j) + 8.0 * sd(j), 200});
    }
  }
  return build_grid_oracle(*prep.model, auto_axes(*prep.model, search, g.grid_points));
}

struct ExperimentResult {
  InferenceTrace trace;
  nlohmann::ordered_json summary;
};

/// Runs the configured algorithm and writes trace.jsonl, final_state.csv,
/// curves.csv, summary.json (plus grid.csv for grid diagnostics and
/// timing.json) into `out_dir`. Every file except timing.json is a
/// deterministic function of the config.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  const PreparedExperiment prep = prepare_experiment(config);
  const ExperimentConfig& c = prep.config;
  std::filesystem::create_directories(out_dir);

  std::optional<GridOracle> oracle;
  if (prep.grid_metrics) oracle = experiment_oracle(prep);
  const Dataset& test = prep.test.points.rows() > 0 ? prep.test : prep.model->data();

  auto metrics = [&](const DensityState& state) {
    Metrics out;
    if (oracle) {
      const KdeDensity kde = as_kde(state);
      const Vector lq = evaluate_on_grid(*oracle, log_density_fn(kde));
      out["tv"] = total_variation(*oracle, lq);
      out["cross_entropy"] = cross_entropy(*oracle, lq);
      out["kl"] = kl_divergence(*oracle, lq);
    } else if (c.model.kind == "logistic") {
      out["accuracy"] = predictive_accuracy(state, test);
    }
    return out;
  };

  ExperimentResult result;
  Rng rng = make_rng(c.seed);
  if (c.algorithm == "pmd") {
    result.trace = run_pmd(c.pmd, *prep.model, rng, RunHooks{metrics, {}});
  } else {
    std::set<std::size_t> record_at;
    const std::size_t kept = (c.sgld.iterations - c.sgld.burn_in) / c.sgld.thin;
    for (std::size_t k = 1; k <= kept; k *= 2) record_at.insert(k);
    record_at.insert(kept);
    std::size_t count = 0;
    const auto start = std::chrono::steady_clock::now();
    auto res = run_sgld(c.sgld, *prep.model, rng, [&](std::size_t visited, const auto& samples) {
      ++count;
      if (!record_at.count(count)) return;
      TraceRecord rec;
      rec.t = c.sgld.burn_in + count * c.sgld.thin;
      rec.gamma = sgld_stepsize(c.sgld, rec.t);
      rec.m = count;
      rec.ess = static_cast<double>(count);
      rec.data_visited = visited;
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rec.state = ParticleCloud::uniform(Matrix(samples));
      rec.metrics = metrics(rec.state);
      result.trace.records.push_back(std::move(rec));
    });
    result.trace.final_state = std::move(res.cloud);
  }

  auto& summary = result.summary;
  summary["algorithm"] = c.algorithm;
  summary["model"] = c.model.kind;
  summary["seed"] = c.seed;
  summary["data_size"] = prep.model->data_size();
  summary["iterations"] = c.algorithm == "pmd" ? c.pmd.iterations : c.sgld.iterations;
  nlohmann::ordered_json final_metrics = nlohmann::ordered_json::object();
  if (!result.trace.records.empty()) {
    const auto& last = result.trace.records.back();
    final_metrics["data_visited"] = last.data_visited;
    final_metrics["ess"] = last.ess;
    for (const auto& [k, v] : last.metrics) final_metrics[k] = v;
  }
  if (oracle) {
    final_metrics["tv_prior"] = total_variation(*oracle, [&](VecRef th) { return prep.model->log_prior(th); });
    final_metrics["oracle_entropy"] = oracle->entropy();
  }
  if (c.model.kind == "logistic") {
    const auto& lm = static_cast<const LogisticModel&>(*prep.model);
    final_metrics["map_accuracy"] = accuracy_of(map_logistic(lm), test);
  }
  summary["final"] = final_metrics;

  write_file_atomic(out_dir / "trace.jsonl", [&](std::ostream& os) { write_trace_jsonl(os, result.trace); });
  write_file_atomic(out_dir / "final_state.csv", [&](std::ostream& os) { write_state_csv(os, result.trace.final_state); });
  write_file_atomic(out_dir / "curves.csv", [&](std::ostream& os) {
    os.precision(17);
    std::vector<std::string> names;
    if (!result.trace.records.empty())
      for (const auto& [k, v] : result.trace.records.front().metrics) names.push_back(k);
    os << "data_visited";
    for (const auto& k : names) os << ',' << k;
    os << '\n';
    for (const auto& rec : result.trace.records) {
      os << rec.data_visited;
      for (const auto& k : names) os << ',' << rec.metrics.at(k);
      os << '\n';
    }
  });
  if (oracle) write_file_atomic(out_dir / "grid.csv", [&](std::ostream& os) { write_grid_csv(os, *oracle); });
  write_file_atomic(out_dir / "summary.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
  write_file_atomic(out_dir / "timing.json", [&](std::ostream& os) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& rec : result.trace.records) j.push_back({{"t", rec.t}, {"wall_seconds", rec.wall_seconds}});
    os << j.dump() << '\n';
  });
  return result;
}

/// Median over seed_*/summary.json of every numeric entry of "final".
inline nlohmann::ordered_json summarize_runs(const std::filesystem::path& dir) {
  std::map<std::string, std::vector<double>> values;
  std::size_t runs = 0;
  std::vector<std::filesystem::path> summaries;
  if (std::filesystem::exists(dir / "summary.json")) summaries.push_back(dir / "summary.json");
  if (std::filesystem::is_directory(dir))
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "summary.json"))
        summaries.push_back(entry.path() / "summary.json");
  std::sort(summaries.begin(), summaries.end());
  for (const auto& path : summaries) {
    std::ifstream is(path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    ++runs;
    if (!j.contains("final")) continue;
    for (const auto& [k, v] : j["final"].items())
      if (v.is_number()) values[k].push_back(v.get<double>());
  }
  if (runs == 0) throw Error(ErrorKind::Io, "no summary.json found under " + dir.string());
  nlohmann::ordered_json out;
  out["runs"] = runs;
  nlohmann::ordered_json med = nlohmann::ordered_json::object();
  for (auto& [k, v] : values) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    med[k] = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  out["median"] = med;
  return out;
}

}  // namespace pmd
