#include "mvae/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mvae/error.hpp"

namespace mvae {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Typed access to one section, remembering which keys were consumed.
class Section {
 public:
  Section(const IniDocument& doc, std::string name) : name_(std::move(name)) {
    if (auto it = doc.find(name_); it != doc.end()) values_ = &it->second;
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return values_ != nullptr && values_->count(key) != 0;
  }

  std::string str(const std::string& key, const std::string& fallback) {
    return has(key) ? values_->at(key) : fallback;
  }

  double real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const std::string& v = values_->at(key);
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a real number");
    return out;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const std::string& v = values_->at(key);
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
    return out;
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string& v = values_->at(key);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    bad(key, v, "a boolean");
  }

  std::vector<std::string> list(const std::string& key) {
    return has(key) ? split_list(values_->at(key)) : std::vector<std::string>{};
  }

  void reject_unknown() const {
    if (values_ == nullptr) return;
    for (const auto& [k, v] : *values_) {
      if (!used_.count(k)) throw ConfigError("unknown key '" + k + "' in section [" + name_ + "]");
    }
  }

  [[noreturn]] void bad(const std::string& key, const std::string& v, const char* want) const {
    throw ConfigError("[" + name_ + "] " + key + " = '" + v + "' is not " + want);
  }

 private:
  std::string name_;
  const std::map<std::string, std::string>* values_ = nullptr;
  std::set<std::string> used_;
};

template <class F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

IniDocument parse_ini(std::string_view text, const std::string& origin) {
  IniDocument doc;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto c = line.find_first_of("#;"); c != std::string::npos) line.erase(c);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of any section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!doc[section].emplace(key, value).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
  }
  return doc;
}

ExperimentConfig config_from_ini(const IniDocument& doc, const fs::path& base_dir) {
  static const std::set<std::string> known{"experiment", "data", "train", "eval", "render", "output"};
  for (const auto& [name, _] : doc) {
    if (!known.count(name)) throw ConfigError("unknown section [" + name + "]");
  }
  ExperimentConfig cfg;

  Section exp(doc, "experiment");
  cfg.name = exp.str("name", cfg.name);
  exp.reject_unknown();

  Section data(doc, "data");
  DatasetSpec& ds = cfg.data;
  ds.name = data.str("name", ds.name);
  ds.format = parse_data_format(data.str("format", "synthetic"));
  const auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : fs::absolute(base_dir / path).lexically_normal();
  };
  for (const auto& p : data.list("train_files")) ds.train_files.push_back(resolve(p));
  for (const auto& p : data.list("test_files")) ds.test_files.push_back(resolve(p));
  ds.cifar_label_bytes = static_cast<int>(data.count("cifar_label_bytes", 1));
  ds.synth_classes = static_cast<int>(data.count("classes", 8));
  ds.synth_samples = data.count("samples", 2000);
  ds.synth_dim = data.count("dim", 16);
  ds.synth_spread = data.real("spread", 0.5);
  ds.split_seed = data.count("seed", 0);
  if (data.has("split")) {
    const auto parts = data.list("split");
    if (parts.size() != 3) data.bad("split", data.str("split", ""), "train,val,test counts");
    SplitRule rule;
    std::size_t* dst[3] = {&rule.train, &rule.val, &rule.test};
    for (std::size_t i = 0; i < 3; ++i) {
      const auto [p, ec] =
          std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), *dst[i]);
      if (ec != std::errc() || p != parts[i].data() + parts[i].size()) {
        data.bad("split", data.str("split", ""), "train,val,test counts");
      }
    }
    ds.split = rule;
  }
  data.reject_unknown();
  if (ds.format != DataFormat::synthetic && ds.train_files.empty()) {
    throw ConfigError("[data] train_files is required for format " + std::string(to_string(ds.format)));
  }
  if (ds.cifar_label_bytes != 1 && ds.cifar_label_bytes != 2) {
    throw ConfigError("[data] cifar_label_bytes must be 1 or 2");
  }
  if (ds.synth_classes < 1 || ds.synth_dim < 1 || ds.synth_samples < 1 || !(ds.synth_spread >= 0.0)) {
    throw ConfigError("[data] synthetic classes, samples and dim must be positive");
  }

  Section tr(doc, "train");
  TrainConfig& t = cfg.train;
  t.model = as_config_error([&] { return parse_model_kind(tr.str("model", "mvae")); });
  t.likelihood = as_config_error([&] { return parse_likelihood(tr.str("likelihood", "bernoulli")); });
  t.latent = tr.count("latent", t.latent);
  t.hidden = tr.count("hidden", t.hidden);
  t.epochs = tr.count("epochs", t.epochs);
  t.batch_size = tr.count("batch_size", t.batch_size);
  t.learning_rate = tr.real("learning_rate", t.learning_rate);
  t.weight_decay = tr.real("weight_decay", t.weight_decay);
  t.beta1 = tr.real("beta1", t.beta1);
  t.beta2 = tr.real("beta2", t.beta2);
  t.adam_eps = tr.real("adam_eps", t.adam_eps);
  t.patience = tr.count("patience", t.patience);
  t.min_delta = tr.real("min_delta", t.min_delta);
  t.seed = tr.count("seed", t.seed);
  t.couple_mean = tr.flag("couple_mean", t.couple_mean);
  t.freeze_coupling = tr.flag("freeze_coupling", t.freeze_coupling);
  tr.reject_unknown();
  as_config_error([&] {
    t.validate();
    return 0;
  });

  Section ev(doc, "eval");
  EvalConfig& e = cfg.eval;
  e.elbo_samples = ev.count("elbo_samples", e.elbo_samples);
  e.ece_bins = ev.count("ece_bins", e.ece_bins);
  e.kmeans_restarts = ev.count("kmeans_restarts", e.kmeans_restarts);
  e.probe.iterations = ev.count("probe_iterations", e.probe.iterations);
  e.probe.learning_rate = ev.real("probe_learning_rate", e.probe.learning_rate);
  e.probe.l2 = ev.real("probe_l2", e.probe.l2);
  e.seed = ev.count("seed", e.seed);
  e.batch_size = ev.count("batch_size", e.batch_size);
  ev.reject_unknown();
  if (e.elbo_samples < 1 || e.ece_bins < 1 || e.kmeans_restarts < 1 || e.batch_size < 1) {
    throw ConfigError("[eval] sample, bin, restart and batch counts must be positive");
  }

  Section rd(doc, "render");
  RenderOptions& r = cfg.render;
  r.recon_count = rd.count("recon_count", r.recon_count);
  r.sweep_grid = rd.count("sweep_grid", r.sweep_grid);
  r.sweep_range = rd.real("sweep_range", r.sweep_range);
  r.sweep_dim_a = rd.count("sweep_dim_a", r.sweep_dim_a);
  r.sweep_dim_b = rd.count("sweep_dim_b", r.sweep_dim_b);
  r.seed = rd.count("seed", r.seed);
  rd.reject_unknown();
  if (r.recon_count < 1 || r.sweep_grid < 1 || !(r.sweep_range > 0.0)) {
    throw ConfigError("[render] counts and range must be positive");
  }

  Section out(doc, "output");
  const std::string dir = out.str("dir", "runs/" + cfg.name);
  cfg.wall_time = out.flag("wall_time", false);
  out.reject_unknown();
  fs::path od(dir);
  if (od.is_relative()) {
    const char* root = std::getenv(kOutputRootEnv);
    od = (root != nullptr && *root != '\0') ? fs::path(root) / od : fs::current_path() / od;
  }
  cfg.output_dir = od.lexically_normal();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path base = fs::absolute(path).parent_path();
  return config_from_ini(parse_ini(ss.str(), path.string()), base);
}

std::string to_ini(const ExperimentConfig& cfg) {
  std::ostringstream o;
  const auto join = [](const std::vector<fs::path>& ps) {
    std::string s;
    for (const auto& p : ps) {
      if (!s.empty()) s += ", ";
      s += p.string();
    }
    return s;
  };
  const auto b = [](bool v) { return v ? "true" : "false"; };
  const DatasetSpec& d = cfg.data;
  const TrainConfig& t = cfg.train;
  const EvalConfig& e = cfg.eval;
  const RenderOptions& r = cfg.render;

  o << "[experiment]\nname = " << cfg.name << "\n\n";
  o << "[data]\nname = " << d.name << "\nformat = " << to_string(d.format) << "\n";
  if (!d.train_files.empty()) o << "train_files = " << join(d.train_files) << "\n";
  if (!d.test_files.empty()) o << "test_files = " << join(d.test_files) << "\n";
  o << "cifar_label_bytes = " << d.cifar_label_bytes << "\n";
  o << "classes = " << d.synth_classes << "\nsamples = " << d.synth_samples
    << "\ndim = " << d.synth_dim << "\nspread = " << format_double(d.synth_spread) << "\n";
  if (d.split) o << "split = " << d.split->train << "," << d.split->val << "," << d.split->test << "\n";
  o << "seed = " << d.split_seed << "\n\n";

  o << "[train]\nmodel = " << to_string(t.model) << "\nlikelihood = " << to_string(t.likelihood)
    << "\nlatent = " << t.latent << "\nhidden = " << t.hidden << "\nepochs = " << t.epochs
    << "\nbatch_size = " << t.batch_size << "\nlearning_rate = " << format_double(t.learning_rate)
    << "\nweight_decay = " << format_double(t.weight_decay) << "\nbeta1 = " << format_double(t.beta1)
    << "\nbeta2 = " << format_double(t.beta2) << "\nadam_eps = " << format_double(t.adam_eps)
    << "\npatience = " << t.patience << "\nmin_delta = " << format_double(t.min_delta)
    << "\nseed = " << t.seed << "\ncouple_mean = " << b(t.couple_mean)
    << "\nfreeze_coupling = " << b(t.freeze_coupling) << "\n\n";

  o << "[eval]\nelbo_samples = " << e.elbo_samples << "\nece_bins = " << e.ece_bins
    << "\nkmeans_restarts = " << e.kmeans_restarts << "\nprobe_iterations = " << e.probe.iterations
    << "\nprobe_learning_rate = " << format_double(e.probe.learning_rate)
    << "\nprobe_l2 = " << format_double(e.probe.l2) << "\nseed = " << e.seed
    << "\nbatch_size = " << e.batch_size << "\n\n";

  o << "[render]\nrecon_count = " << r.recon_count << "\nsweep_grid = " << r.sweep_grid
    << "\nsweep_range = " << format_double(r.sweep_range) << "\nsweep_dim_a = " << r.sweep_dim_a
    << "\nsweep_dim_b = " << r.sweep_dim_b << "\nseed = " << r.seed << "\n\n";

  o << "[output]\ndir = " << cfg.output_dir.string() << "\nwall_time = " << b(cfg.wall_time) << "\n";
  return o.str();
}

}  // namespace mvae
