#include "metagen/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "metagen/idx.hpp"

namespace metagen {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot read '" + std::string(value) +
                    "' as " + std::string(expected));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad(key, v, "an unsigned integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) bad(key, v, "a number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "a boolean");
}

std::vector<std::size_t> to_size_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto item : split_list(v)) out.push_back(to_size(key, item));
  return out;
}

Schedule to_schedule(std::string_view key, std::string_view v) {
  Schedule s;
  s.values.clear();
  for (auto item : split_list(v)) s.values.push_back(to_double(key, item));
  return s;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_schedule(const Schedule& s) {
  std::string out;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    if (k) out += ',';
    out += fmt_double(s.values[k]);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"env", [](auto& c, auto k, auto v) {
         if (v == "gaussian") c.env.kind = EnvKind::kGaussian;
         else if (v == "idx") c.env.kind = EnvKind::kIdx;
         else bad(k, v, "gaussian | idx");
       }},
      {"env.num_classes", [](auto& c, auto k, auto v) { c.env.num_classes = to_size(k, v); }},
      {"env.dim", [](auto& c, auto k, auto v) { c.env.dim = to_size(k, v); }},
      {"env.std", [](auto& c, auto k, auto v) { c.env.std = to_double(k, v); }},
      {"task_mode", [](auto& c, auto k, auto v) {
         try {
           c.env.mode = parse_task_mode(v);
         } catch (const std::exception&) {
           bad(k, v, "class-pair | one-vs-rest");
         }
       }},
      {"idx.images", [](auto& c, auto, auto v) { c.env.images = std::string(v); }},
      {"idx.labels", [](auto& c, auto, auto v) { c.env.labels = std::string(v); }},
      {"idx.center", [](auto& c, auto k, auto v) { c.env.center = to_bool(k, v); }},
      {"n", [](auto& c, auto k, auto v) { c.n_values = to_size_list(k, v); }},
      {"m", [](auto& c, auto k, auto v) { c.m_values = to_size_list(k, v); }},
      {"t1", [](auto& c, auto k, auto v) { c.t1 = to_size(k, v); }},
      {"t2", [](auto& c, auto k, auto v) { c.t2 = to_size(k, v); }},
      {"trainer", [](auto& c, auto k, auto v) {
         if (v == "joint-sgld") c.trainer = Trainer::kJointSgld;
         else if (v == "noisy-maml") c.trainer = Trainer::kNoisyMaml;
         else bad(k, v, "joint-sgld | noisy-maml");
       }},
      {"train.iterations", [](auto& c, auto k, auto v) { c.sgld.iterations = to_size(k, v); }},
      {"train.eta", [](auto& c, auto k, auto v) { c.sgld.eta = to_schedule(k, v); }},
      {"train.sigma", [](auto& c, auto k, auto v) { c.sgld.sigma = to_schedule(k, v); }},
      {"train.beta", [](auto& c, auto k, auto v) { c.beta = to_schedule(k, v); }},
      {"train.task_batch", [](auto& c, auto k, auto v) { c.sgld.task_batch = to_size(k, v); }},
      {"train.sample_batch", [](auto& c, auto k, auto v) { c.sgld.sample_batch = to_size(k, v); }},
      {"train.m_te", [](auto& c, auto k, auto v) { c.m_test = to_size(k, v); }},
      {"train.track_covariance",
       [](auto& c, auto k, auto v) { c.sgld.track_covariance = to_bool(k, v); }},
      {"train.cov_resamples", [](auto& c, auto k, auto v) { c.sgld.cov_resamples = to_size(k, v); }},
      {"train.cov_max_dim", [](auto& c, auto k, auto v) { c.sgld.cov_max_dim = to_size(k, v); }},
      {"adapt.steps", [](auto& c, auto k, auto v) { c.sgld.adapt.steps = to_size(k, v); }},
      {"adapt.step_size", [](auto& c, auto k, auto v) { c.sgld.adapt.step_size = to_double(k, v); }},
      {"adapt.sigma", [](auto& c, auto k, auto v) { c.sgld.adapt.sigma = to_double(k, v); }},
      {"model.hidden", [](auto& c, auto k, auto v) { c.hidden = to_size(k, v); }},
      {"model.layers", [](auto& c, auto k, auto v) { c.layers = to_size(k, v); }},
      {"bounds", [](auto& c, auto, auto v) {
         c.bounds.clear();
         if (v == "all") {
           c.bounds = known_bounds();
         } else if (v != "none" && !v.empty()) {
           for (auto item : split_list(v)) c.bounds.emplace_back(item);
         }
       }},
      {"bounds.c1", [](auto& c, auto k, auto v) { c.params.c1 = to_double(k, v); }},
      {"bounds.c2", [](auto& c, auto k, auto v) { c.params.c2 = to_double(k, v); }},
      {"bounds.gamma", [](auto& c, auto k, auto v) { c.params.gamma = to_double(k, v); }},
      {"bounds.constant_variant", [](auto& c, auto k, auto v) {
         if (v == "proof") c.params.variant = ConstantVariant::kProof;
         else if (v == "statement") c.params.variant = ConstantVariant::kStatement;
         else bad(k, v, "proof | statement");
       }},
      {"estimator.miller_madow",
       [](auto& c, auto k, auto v) { c.estimator.miller_madow = to_bool(k, v); }},
      {"seed", [](auto& c, auto k, auto v) { c.seed = to_u64(k, v); }},
      {"out", [](auto& c, auto, auto v) { c.out = std::string(v); }},
      {"jobs", [](auto& c, auto k, auto v) { c.jobs = to_size(k, v); }},
  };
  return table;
}

}  // namespace

std::string_view to_string(EnvKind kind) { return kind == EnvKind::kIdx ? "idx" : "gaussian"; }

std::string_view to_string(Trainer trainer) {
  return trainer == Trainer::kNoisyMaml ? "noisy-maml" : "joint-sgld";
}

const std::vector<std::string>& known_bounds() {
  static const std::vector<std::string> names = {
      "sqrt_delta_mi", "sqrt_delta_cmi", "sqrt_quad_mi", "sqrt_quad_cmi",
      "kl_quad_mi",    "fast_rate",      "fast_rate_interpolating",
      "variance_fast_rate", "interpolating_risk", "trajectory",
  };
  return names;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (n_values.empty() || m_values.empty()) fail("n and m need at least one value");
  for (auto v : n_values) if (v == 0) fail("n must be >= 1");
  for (auto v : m_values) if (v == 0) fail("m must be >= 1");
  if (t1 == 0 || t2 == 0) fail("t1 and t2 must be >= 1");
  if (hidden == 0 || layers == 0) fail("model.hidden and model.layers must be >= 1");
  if (sgld.task_batch == 0 || sgld.sample_batch == 0) fail("batch sizes must be >= 1");
  if (sgld.track_covariance && sgld.cov_resamples < 2) fail("train.cov_resamples must be >= 2");
  if (sgld.eta.values.empty() || sgld.sigma.values.empty() || beta.values.empty()) {
    fail("schedules need at least one value");
  }
  for (double s : sgld.sigma.values) if (!(s >= 0.0)) fail("train.sigma must be >= 0");
  if (!(sgld.adapt.sigma >= 0.0)) fail("adapt.sigma must be >= 0");
  if (jobs == 0) fail("jobs must be >= 1");
  for (const auto& b : bounds) {
    const auto& known = known_bounds();
    if (std::find(known.begin(), known.end(), b) == known.end()) fail("unknown bound '" + b + "'");
  }
  if (env.kind == EnvKind::kGaussian) {
    if (env.dim == 0 || env.num_classes < 2) fail("gaussian env needs dim >= 1, num_classes >= 2");
    if (!(env.std > 0.0)) fail("env.std must be positive");
  } else if (env.images.empty() || env.labels.empty()) {
    fail("idx env needs idx.images and idx.labels");
  }
  if (trainer == Trainer::kNoisyMaml) {
    for (auto m : m_values) {
      const std::size_t te = m_test == 0 ? m / 2 : m_test;
      if (te == 0 || te >= m) fail("noisy-maml needs 1 <= train.m_te < m for every m");
    }
  }
  // Constants are checked up front so that a sweep never fails half-way.
  try {
    const double c1_min = fast_rate_constants(params.c2, params.variant);
    if (params.c1 != 0.0 && params.c1 < c1_min) {
      fail("bounds.c1 violates C1 >= C1_min(C2) = " + std::to_string(c1_min));
    }
    const double var_min = variance_fast_rate_constants(params.c2, params.gamma);
    const bool wants_variance =
        std::find(bounds.begin(), bounds.end(), "variance_fast_rate") != bounds.end();
    if (params.c1 != 0.0 && wants_variance && params.c1 < var_min) {
      fail("bounds.c1 violates the gamma-variance minimum " + std::to_string(var_min));
    }
  } catch (const BoundConfigError& e) {
    fail(e.what());
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
    }
    it->second(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_text(const ExperimentConfig& cfg, std::size_t n, std::size_t m) {
  std::ostringstream o;
  o << "env=" << to_string(cfg.env.kind) << '\n';
  if (cfg.env.kind == EnvKind::kGaussian) {
    o << "env.num_classes=" << cfg.env.num_classes << "\nenv.dim=" << cfg.env.dim
      << "\nenv.std=" << fmt_double(cfg.env.std) << '\n';
  } else {
    o << "idx.images=" << cfg.env.images << "\nidx.labels=" << cfg.env.labels
      << "\nidx.center=" << cfg.env.center << '\n';
  }
  o << "task_mode=" << to_string(cfg.env.mode) << "\nn=" << n << "\nm=" << m << "\nt1=" << cfg.t1
    << "\nt2=" << cfg.t2 << "\ntrainer=" << to_string(cfg.trainer)
    << "\ntrain.iterations=" << cfg.sgld.iterations << "\ntrain.eta=" << fmt_schedule(cfg.sgld.eta)
    << "\ntrain.sigma=" << fmt_schedule(cfg.sgld.sigma);
  if (cfg.trainer == Trainer::kNoisyMaml) {
    o << "\ntrain.beta=" << fmt_schedule(cfg.beta) << "\ntrain.m_te=" << cfg.m_test;
  }
  o << "\ntrain.task_batch=" << cfg.sgld.task_batch << "\ntrain.sample_batch="
    << cfg.sgld.sample_batch << "\ntrain.track_covariance=" << cfg.sgld.track_covariance
    << "\ntrain.cov_resamples=" << cfg.sgld.cov_resamples
    << "\nadapt.steps=" << cfg.sgld.adapt.steps
    << "\nadapt.step_size=" << fmt_double(cfg.sgld.adapt.step_size)
    << "\nadapt.sigma=" << fmt_double(cfg.sgld.adapt.sigma) << "\nmodel.hidden=" << cfg.hidden
    << "\nmodel.layers=" << cfg.layers << "\nbounds.c1=" << fmt_double(cfg.params.c1)
    << "\nbounds.c2=" << fmt_double(cfg.params.c2)
    << "\nbounds.gamma=" << fmt_double(cfg.params.gamma)
    << "\nbounds.constant_variant=" << to_string(cfg.params.variant)
    << "\nestimator.miller_madow=" << cfg.estimator.miller_madow << "\nseed=" << cfg.seed << '\n';
  return o.str();
}

std::string config_hash(const ExperimentConfig& cfg, std::size_t n, std::size_t m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : canonical_text(cfg, n, m)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::unique_ptr<TaskEnvironment> make_environment(const EnvSpec& spec) {
  if (spec.kind == EnvKind::kGaussian) {
    return std::make_unique<GaussianEnv>(
        make_gaussian_env(spec.num_classes, spec.dim, spec.std, spec.mode));
  }
  const auto images = load_idx_file(spec.images);
  const auto labels = load_idx_file(spec.labels);
  return std::make_unique<FiniteTaskEnv>(
      class_tasks_from_dataset(images, labels, spec.mode, DatasetOptions{spec.center}));
}

}  // namespace metagen
