#include "kinflow/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace kinflow {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long long parse_ll(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v, long long lo, long long hi) {
  const long long x = parse_ll(key, v);
  if (x < lo || x > hi)
    throw ConfigError("config key '" + key + "': value " + v + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v, double lo, double hi) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    if (x < lo || x > hi) throw std::out_of_range("");
    return x;
  } catch (const std::out_of_range&) {
    throw ConfigError("config key '" + key + "': value " + v + " outside valid range");
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  return out;
}

struct Entry {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Entry>& schema() {
  static const std::vector<Entry> table = {
      {"skeleton.file", "skeleton JSON path; empty = built-in humanoid",
       [](RunConfig& c, const std::string& v) { c.skeleton.file = v; },
       [](const RunConfig& c) { return c.skeleton.file; }},
      {"data.n_train", "training split size",
       [](RunConfig& c, const std::string& v) { c.data.n_train = parse_int("data.n_train", v, 0, 1 << 26); },
       [](const RunConfig& c) { return std::to_string(c.data.n_train); }},
      {"data.n_val", "validation split size",
       [](RunConfig& c, const std::string& v) { c.data.n_val = parse_int("data.n_val", v, 0, 1 << 26); },
       [](const RunConfig& c) { return std::to_string(c.data.n_val); }},
      {"data.n_test", "test split size",
       [](RunConfig& c, const std::string& v) { c.data.n_test = parse_int("data.n_test", v, 0, 1 << 26); },
       [](const RunConfig& c) { return std::to_string(c.data.n_test); }},
      {"data.seed", "master seed for dataset generation",
       [](RunConfig& c, const std::string& v) { c.data.seed = parse_u64("data.seed", v); },
       [](const RunConfig& c) { return std::to_string(c.data.seed); }},
      {"noise.base_sigma", "visible-joint position noise, meters",
       [](RunConfig& c, const std::string& v) { c.noise.base_sigma = parse_double("noise.base_sigma", v, 0, 10); },
       [](const RunConfig& c) { return fmt(c.noise.base_sigma); }},
      {"noise.occlusion_prob", "per-joint occlusion probability",
       [](RunConfig& c, const std::string& v) { c.noise.occlusion_prob = parse_double("noise.occlusion_prob", v, 0, 1); },
       [](const RunConfig& c) { return fmt(c.noise.occlusion_prob); }},
      {"noise.occluded_sigma", "occluded-joint position noise, meters",
       [](RunConfig& c, const std::string& v) { c.noise.occluded_sigma = parse_double("noise.occluded_sigma", v, 0, 10); },
       [](const RunConfig& c) { return fmt(c.noise.occluded_sigma); }},
      {"noise.twist_sigma", "occluded-joint twist noise, radians",
       [](RunConfig& c, const std::string& v) { c.noise.twist_sigma = parse_double("noise.twist_sigma", v, 0, 10); },
       [](const RunConfig& c) { return fmt(c.noise.twist_sigma); }},
      {"noise.confidence_scale", "confidence decay scale, meters",
       [](RunConfig& c, const std::string& v) { c.noise.confidence_scale = parse_double("noise.confidence_scale", v, 1e-9, 10); },
       [](const RunConfig& c) { return fmt(c.noise.confidence_scale); }},
      {"noise.confidence_floor", "confidence clip floor",
       [](RunConfig& c, const std::string& v) { c.noise.confidence_floor = parse_double("noise.confidence_floor", v, 0, 1); },
       [](const RunConfig& c) { return fmt(c.noise.confidence_floor); }},
      {"model.kind", "one_stage | twist_and_swing",
       [](RunConfig& c, const std::string& v) {
         try {
           c.model.kind = model_kind_from_string(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(std::string("config key 'model.kind': ") + e.what());
         }
       },
       [](const RunConfig& c) { return to_string(c.model.kind); }},
      {"model.z_dim", "error embedding width D_z",
       [](RunConfig& c, const std::string& v) { c.model.z_dim = parse_int("model.z_dim", v, 1, 4096); },
       [](const RunConfig& c) { return std::to_string(c.model.z_dim); }},
      {"model.z_swing_dim", "swing latent width D_sw (twist_and_swing)",
       [](RunConfig& c, const std::string& v) { c.model.z_swing_dim = parse_int("model.z_swing_dim", v, 1, 4096); },
       [](const RunConfig& c) { return std::to_string(c.model.z_swing_dim); }},
      {"model.blocks", "coupling blocks per invertible net",
       [](RunConfig& c, const std::string& v) { c.model.blocks = parse_int("model.blocks", v, 1, 256); },
       [](const RunConfig& c) { return std::to_string(c.model.blocks); }},
      {"model.hidden", "hidden width of the coupling conditioners",
       [](RunConfig& c, const std::string& v) { c.model.hidden = parse_int("model.hidden", v, 1, 8192); },
       [](const RunConfig& c) { return std::to_string(c.model.hidden); }},
      {"model.perm_seed", "seed of the fixed coordinate permutations",
       [](RunConfig& c, const std::string& v) { c.model.perm_seed = parse_u64("model.perm_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.model.perm_seed); }},
      {"model.init_seed", "parameter initialization seed",
       [](RunConfig& c, const std::string& v) { c.model.init_seed = parse_u64("model.init_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.model.init_seed); }},
      {"model.mlp_hidden", "hidden width of the MLP baseline",
       [](RunConfig& c, const std::string& v) { c.model.mlp_hidden = parse_int("model.mlp_hidden", v, 1, 8192); },
       [](const RunConfig& c) { return std::to_string(c.model.mlp_hidden); }},
      {"model.mlp_layers", "weight layers of the MLP baseline",
       [](RunConfig& c, const std::string& v) { c.model.mlp_layers = parse_int("model.mlp_layers", v, 1, 16); },
       [](const RunConfig& c) { return std::to_string(c.model.mlp_layers); }},
      {"training.epochs", "training epochs",
       [](RunConfig& c, const std::string& v) { c.training.epochs = parse_int("training.epochs", v, 1, 1 << 20); },
       [](const RunConfig& c) { return std::to_string(c.training.epochs); }},
      {"training.batch_size", "mini-batch size",
       [](RunConfig& c, const std::string& v) { c.training.batch_size = parse_int("training.batch_size", v, 1, 1 << 20); },
       [](const RunConfig& c) { return std::to_string(c.training.batch_size); }},
      {"training.lr", "Adam learning rate",
       [](RunConfig& c, const std::string& v) { c.training.lr = parse_double("training.lr", v, 1e-12, 10); },
       [](const RunConfig& c) { return fmt(c.training.lr); }},
      {"training.decay_epochs", "epochs at which lr is multiplied by decay_factor",
       [](RunConfig& c, const std::string& v) {
         c.training.decay_epochs.clear();
         for (const std::string& item : split_list(v))
           c.training.decay_epochs.push_back(parse_int("training.decay_epochs", item, 1, 1 << 20));
       },
       [](const RunConfig& c) {
         return join(c.training.decay_epochs, [](int e) { return std::to_string(e); });
       }},
      {"training.decay_factor", "learning-rate decay factor",
       [](RunConfig& c, const std::string& v) { c.training.decay_factor = parse_double("training.decay_factor", v, 1e-6, 1); },
       [](const RunConfig& c) { return fmt(c.training.decay_factor); }},
      {"training.clip_norm", "global gradient-norm clip",
       [](RunConfig& c, const std::string& v) { c.training.clip_norm = parse_double("training.clip_norm", v, 1e-9, 1e9); },
       [](const RunConfig& c) { return fmt(c.training.clip_norm); }},
      {"training.seed", "training seed (init order, shuffling, MMD draws)",
       [](RunConfig& c, const std::string& v) { c.training.seed = parse_u64("training.seed", v); },
       [](const RunConfig& c) { return std::to_string(c.training.seed); }},
      {"loss.inverse", "weight of the inverse (rotation + FK) loss",
       [](RunConfig& c, const std::string& v) { c.training.weights.inverse = parse_double("loss.inverse", v, 0, 1e6); },
       [](const RunConfig& c) { return fmt(c.training.weights.inverse); }},
      {"loss.forward", "weight of the forward reconstruction loss",
       [](RunConfig& c, const std::string& v) { c.training.weights.forward = parse_double("loss.forward", v, 0, 1e6); },
       [](const RunConfig& c) { return fmt(c.training.weights.forward); }},
      {"loss.independence", "weight of the MMD independence loss",
       [](RunConfig& c, const std::string& v) { c.training.weights.independence = parse_double("loss.independence", v, 0, 1e6); },
       [](const RunConfig& c) { return fmt(c.training.weights.independence); }},
      {"loss.boundary_inverse", "weight of the inverse boundary loss",
       [](RunConfig& c, const std::string& v) { c.training.weights.boundary_inverse = parse_double("loss.boundary_inverse", v, 0, 1e6); },
       [](const RunConfig& c) { return fmt(c.training.weights.boundary_inverse); }},
      {"loss.boundary_forward", "weight of the forward boundary loss",
       [](RunConfig& c, const std::string& v) { c.training.weights.boundary_forward = parse_double("loss.boundary_forward", v, 0, 1e6); },
       [](const RunConfig& c) { return fmt(c.training.weights.boundary_forward); }},
      {"loss.swing", "weight of the swing supervision",
       [](RunConfig& c, const std::string& v) { c.training.weights.swing = parse_double("loss.swing", v, 0, 1e6); },
       [](const RunConfig& c) { return fmt(c.training.weights.swing); }},
      {"loss.padding", "weight of the padding-slot penalty",
       [](RunConfig& c, const std::string& v) { c.training.weights.padding = parse_double("loss.padding", v, 0, 1e6); },
       [](const RunConfig& c) { return fmt(c.training.weights.padding); }},
      {"mmd.kernel", "gaussian_mixture | inverse_multiquadric",
       [](RunConfig& c, const std::string& v) {
         if (v == "gaussian_mixture") c.training.kernel.family = MmdKernel::Family::gaussian_mixture;
         else if (v == "inverse_multiquadric") c.training.kernel.family = MmdKernel::Family::inverse_multiquadric;
         else throw ConfigError("config key 'mmd.kernel': unknown kernel '" + v + "'");
       },
       [](const RunConfig& c) {
         return c.training.kernel.family == MmdKernel::Family::gaussian_mixture
                    ? "gaussian_mixture"
                    : "inverse_multiquadric";
       }},
      {"mmd.bandwidth_scales", "multipliers of the median pairwise distance",
       [](RunConfig& c, const std::string& v) {
         c.training.kernel.bandwidth_scales.clear();
         for (const std::string& item : split_list(v))
           c.training.kernel.bandwidth_scales.push_back(parse_double("mmd.bandwidth_scales", item, 1e-9, 1e9));
         if (c.training.kernel.bandwidth_scales.empty())
           throw ConfigError("config key 'mmd.bandwidth_scales': need at least one bandwidth");
       },
       [](const RunConfig& c) {
         return join(c.training.kernel.bandwidth_scales, [](double b) { return fmt(b); });
       }},
      {"ablation.disable_independence", "drop the independence loss",
       [](RunConfig& c, const std::string& v) { c.training.ablation.disable_independence = parse_bool("ablation.disable_independence", v); },
       [](const RunConfig& c) { return c.training.ablation.disable_independence ? "true" : "false"; }},
      {"ablation.disable_boundary", "drop both boundary losses",
       [](RunConfig& c, const std::string& v) { c.training.ablation.disable_boundary = parse_bool("ablation.disable_boundary", v); },
       [](const RunConfig& c) { return c.training.ablation.disable_boundary ? "true" : "false"; }},
      {"ablation.disable_forward_training", "inverse-only training",
       [](RunConfig& c, const std::string& v) { c.training.ablation.disable_forward_training = parse_bool("ablation.disable_forward_training", v); },
       [](const RunConfig& c) { return c.training.ablation.disable_forward_training ? "true" : "false"; }},
      {"eval.sweep_sigmas_mm", "noise levels of the robustness sweep, mm",
       [](RunConfig& c, const std::string& v) {
         c.eval.sweep_sigmas_mm.clear();
         for (const std::string& item : split_list(v))
           c.eval.sweep_sigmas_mm.push_back(parse_double("eval.sweep_sigmas_mm", item, 0, 1e5));
       },
       [](const RunConfig& c) {
         return join(c.eval.sweep_sigmas_mm, [](double s) { return fmt(s); });
       }},
      {"eval.sweep_samples", "fresh samples per sweep level",
       [](RunConfig& c, const std::string& v) { c.eval.sweep_samples = parse_int("eval.sweep_samples", v, 1, 1 << 26); },
       [](const RunConfig& c) { return std::to_string(c.eval.sweep_samples); }},
      {"eval.sweep_seed", "sweep sample seed",
       [](RunConfig& c, const std::string& v) { c.eval.sweep_seed = parse_u64("eval.sweep_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.eval.sweep_seed); }},
      {"threads", "worker threads for generation/evaluation",
       [](RunConfig& c, const std::string& v) { c.threads = parse_int("threads", v, 1, 1024); },
       [](const RunConfig& c) { return std::to_string(c.threads); }},
  };
  return table;
}

void apply(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Entry& e : schema()) {
    if (e.key == key) {
      e.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
      apply(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + o + "': expected key=value");
    apply(config, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  config.noise.validate();
  config.training.validate();
  (void)config.model_dims();  // layout bookkeeping check
  return config;
}

KinematicTree RunConfig::load_tree() const {
  if (skeleton.file.empty()) return KinematicTree::default_humanoid();
  return load_skeleton(skeleton.file);
}

ModelDims RunConfig::model_dims() const {
  ModelDims d;
  const KinematicTree tree = load_tree();
  d.joints = tree.joint_count();
  d.beta_dim = tree.beta_dim();
  d.z_dim = model.z_dim;
  d.z_swing_dim = model.z_swing_dim;
  d.blocks = model.blocks;
  d.hidden = model.hidden;
  d.perm_seed = model.perm_seed;
  d.init_seed = model.init_seed;
  (void)make_layout(model.kind, d);
  return d;
}

SweepConfig RunConfig::sweep_config() const {
  SweepConfig s;
  s.sigmas_m.clear();
  for (double mm : eval.sweep_sigmas_mm) s.sigmas_m.push_back(mm / 1000.0);
  s.samples_per_level = eval.sweep_samples;
  s.seed = eval.sweep_seed;
  return s;
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  for (const Entry& e : schema()) out << e.key << " = " << e.get(*this) << "\n";
  return out.str();
}

std::string config_reference() {
  RunConfig defaults;
  std::ostringstream out;
  for (const Entry& e : schema())
    out << e.key << " = " << e.get(defaults) << "\n    # " << e.help << "\n";
  return out.str();
}

}  // namespace kinflow
