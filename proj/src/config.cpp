#include "vdpcn/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

extern char **environ;

namespace vdpcn::config {

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::paper()
{
  RunConfig c;
  c.model = network::NetworkConfig::paper();
  c.train.epochs = 200;
  c.train.batch_size = 8;
  c.data.gt_points = 16384;
  c.data.shapes = 2000;
  c.distill.epochs = 200;
  return c;
}

training::TrainConfig RunConfig::teacher_train_config() const
{
  training::TrainConfig t;
  t.optimizer = {train.lr, train.beta1, train.beta2, train.eps, train.weight_decay};
  t.epochs = train.epochs;
  t.batch_size = train.batch_size;
  t.seed = train.seed;
  t.max_steps = train.max_steps;
  t.teacher_points = train.teacher_points;
  t.cosine_decay = train.cosine_decay;
  return t;
}

training::TrainConfig RunConfig::student_train_config() const
{
  training::TrainConfig t = teacher_train_config();
  t.optimizer.lr = distill.kd.student_lr;
  t.epochs = distill.epochs;
  t.max_steps = distill.max_steps;
  t.distill = distill.kd;
  return t;
}

training::EvalConfig RunConfig::eval_config(int workers) const { return {eval.f_threshold, eval.merge_input, workers}; }

nlohmann::json to_json(RunConfig const &c)
{
  nlohmann::json groups = nlohmann::json::array();
  for (auto const &g : c.distill.kd.trainable_groups) { groups.push_back(g); }
  return {
    {"model", network::to_json(c.model)},
    {"train",
     {{"lr", c.train.lr},
      {"epochs", c.train.epochs},
      {"batch_size", c.train.batch_size},
      {"seed", c.train.seed},
      {"weight_decay", c.train.weight_decay},
      {"beta1", c.train.beta1},
      {"beta2", c.train.beta2},
      {"eps", c.train.eps},
      {"max_steps", c.train.max_steps},
      {"teacher_points", c.train.teacher_points},
      {"cosine_decay", c.train.cosine_decay},
      {"checkpoint_every", c.train.checkpoint_every}}},
    {"distill",
     {{"tau0", c.distill.kd.tau0},
      {"tau1", c.distill.kd.tau1},
      {"tau2", c.distill.kd.tau2},
      {"variant", std::string(1, distillation::to_char(c.distill.kd.variant))},
      {"trainable_groups", groups},
      {"student_lr", c.distill.kd.student_lr},
      {"epochs", c.distill.epochs},
      {"max_steps", c.distill.max_steps},
      {"use_cache", c.distill.use_cache}}},
    {"data",
     {{"root", c.data.root},
      {"shapes", c.data.shapes},
      {"gt_points", c.data.gt_points},
      {"input_points", c.data.input_points},
      {"difficulty", c.data.difficulty},
      {"split_fraction", c.data.split_fraction},
      {"seed", c.data.seed}}},
    {"eval", {{"f_threshold", c.eval.f_threshold}, {"report_path", c.eval.report_path}, {"merge_input", c.eval.merge_input}}},
    {"ablate", {{"seeds", c.ablate.seeds}, {"variants", c.ablate.variants}, {"csv_path", c.ablate.csv_path}}},
  };
}

namespace {

template <typename T> void read(nlohmann::json const &v, T &out) { out = v.get<T>(); }

// Applies each key of `section` through `set`, which returns false for unknown keys.
template <typename Setter> void apply_section(std::string const &name, nlohmann::json const &section, Setter set)
{
  if (!section.is_object()) { throw ConfigError("config section '" + name + "' must be an object"); }
  for (auto const &[key, value] : section.items()) {
    bool known = false;
    try {
      known = set(key, value);
    } catch (nlohmann::json::exception const &e) {
      throw ConfigError("config key '" + name + "." + key + "': wrong type (" + e.what() + ")");
    } catch (std::invalid_argument const &e) {
      throw ConfigError("config key '" + name + "." + key + "': " + e.what());
    }
    if (!known) { throw ConfigError("unknown config key '" + name + "." + key + "'"); }
  }
}

} // namespace

RunConfig apply_json(RunConfig c, nlohmann::json const &j)
{
  if (!j.is_object()) { throw ConfigError("config must be a JSON object"); }
  for (auto const &[name, section] : j.items()) {
    if (name == "model") {
      try {
        c.model = network::network_config_from_json(section, c.model);
      } catch (std::invalid_argument const &e) {
        throw ConfigError(std::string("config section 'model': ") + e.what());
      }
    } else if (name == "train") {
      auto &t = c.train;
      apply_section(name, section, [&t](std::string const &k, nlohmann::json const &v) {
        if (k == "lr") read(v, t.lr);
        else if (k == "epochs") read(v, t.epochs);
        else if (k == "batch_size" || k == "batch") read(v, t.batch_size);
        else if (k == "seed") read(v, t.seed);
        else if (k == "weight_decay") read(v, t.weight_decay);
        else if (k == "beta1") read(v, t.beta1);
        else if (k == "beta2") read(v, t.beta2);
        else if (k == "eps") read(v, t.eps);
        else if (k == "max_steps") read(v, t.max_steps);
        else if (k == "teacher_points" || k == "n_down") read(v, t.teacher_points);
        else if (k == "cosine_decay") read(v, t.cosine_decay);
        else if (k == "checkpoint_every") read(v, t.checkpoint_every);
        else return false;
        return true;
      });
      if (!(t.lr > 0.0)) { throw ConfigError("config key 'train.lr': must be positive"); }
      if (t.epochs < 1) { throw ConfigError("config key 'train.epochs': must be at least 1"); }
      if (t.batch_size < 1) { throw ConfigError("config key 'train.batch_size': must be at least 1"); }
    } else if (name == "distill") {
      auto &d = c.distill;
      apply_section(name, section, [&d](std::string const &k, nlohmann::json const &v) {
        if (k == "tau0") read(v, d.kd.tau0);
        else if (k == "tau1") read(v, d.kd.tau1);
        else if (k == "tau2") read(v, d.kd.tau2);
        else if (k == "variant") d.kd.variant = distillation::variant_from_string(v.get<std::string>());
        else if (k == "trainable_groups") d.kd.trainable_groups = v.get<std::set<std::string>>();
        else if (k == "student_lr") read(v, d.kd.student_lr);
        else if (k == "epochs") read(v, d.epochs);
        else if (k == "max_steps") read(v, d.max_steps);
        else if (k == "use_cache") read(v, d.use_cache);
        else return false;
        return true;
      });
      if (!(d.kd.student_lr > 0.0)) { throw ConfigError("config key 'distill.student_lr': must be positive"); }
      if (d.epochs < 1) { throw ConfigError("config key 'distill.epochs': must be at least 1"); }
    } else if (name == "data") {
      auto &d = c.data;
      apply_section(name, section, [&d](std::string const &k, nlohmann::json const &v) {
        if (k == "root") read(v, d.root);
        else if (k == "shapes") read(v, d.shapes);
        else if (k == "gt_points") read(v, d.gt_points);
        else if (k == "input_points") read(v, d.input_points);
        else if (k == "difficulty") {
          auto s = v.get<std::string>();
          if (s != "mixed") { dataset::difficulty_from_string(s); }
          d.difficulty = s;
        } else if (k == "split_fraction") read(v, d.split_fraction);
        else if (k == "seed") read(v, d.seed);
        else return false;
        return true;
      });
    } else if (name == "eval") {
      auto &e = c.eval;
      apply_section(name, section, [&e](std::string const &k, nlohmann::json const &v) {
        if (k == "f_threshold") read(v, e.f_threshold);
        else if (k == "report_path") read(v, e.report_path);
        else if (k == "merge_input") read(v, e.merge_input);
        else return false;
        return true;
      });
      if (!(e.f_threshold > 0.0)) { throw ConfigError("config key 'eval.f_threshold': must be positive"); }
    } else if (name == "ablate") {
      auto &a = c.ablate;
      apply_section(name, section, [&a](std::string const &k, nlohmann::json const &v) {
        if (k == "seeds") read(v, a.seeds);
        else if (k == "variants") {
          read(v, a.variants);
          for (auto const &s : a.variants) { distillation::variant_from_string(s); }
        } else if (k == "csv_path") read(v, a.csv_path);
        else return false;
        return true;
      });
    } else {
      throw ConfigError("unknown config section '" + name + "'");
    }
  }
  return c;
}

nlohmann::json env_overrides(std::map<std::string, std::string> const &environment)
{
  static constexpr std::string_view prefix = "VDPCN_";
  static std::vector<std::string> const sections{"model", "train", "distill", "data", "eval", "ablate"};
  auto const reference = to_json(RunConfig{});

  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
  };

  nlohmann::json out = nlohmann::json::object();
  for (auto const &[name, raw] : environment) {
    if (name.rfind(prefix, 0) != 0) { continue; }
    std::string const rest = lower(name.substr(prefix.size()));
    auto const section = std::find_if(sections.begin(), sections.end(), [&](std::string const &s) { return rest.rfind(s + "_", 0) == 0; });
    if (section == sections.end()) { throw ConfigError("environment variable " + name + " does not name a config section"); }
    std::string key = rest.substr(section->size() + 1);
    // Canonical key names are snake_case, so lowercase matching recovers them.
    for (auto const &[known, _] : reference.at(*section).items()) {
      if (lower(known) == key) { key = known; }
    }
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) { value = raw; }
    out[*section][key] = value;
  }
  return out;
}

std::map<std::string, std::string> process_environment()
{
  std::map<std::string, std::string> env;
  for (char **e = environ; e && *e; ++e) {
    std::string const entry(*e);
    auto const eq = entry.find('=');
    if (eq != std::string::npos && entry.rfind("VDPCN_", 0) == 0) { env[entry.substr(0, eq)] = entry.substr(eq + 1); }
  }
  return env;
}

RunConfig load_run_config(
  std::string const &preset, std::optional<std::filesystem::path> const &file, std::map<std::string, std::string> const &environment)
{
  RunConfig c;
  if (preset == "desk") c = RunConfig::desk();
  else if (preset == "paper") c = RunConfig::paper();
  else throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");

  if (file) {
    std::ifstream in(*file);
    if (!in) { throw ConfigError("cannot open config file " + file->string()); }
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) { throw ConfigError("config file " + file->string() + " is not valid JSON"); }
    c = apply_json(std::move(c), j);
  }
  return apply_json(std::move(c), env_overrides(environment));
}

} // namespace vdpcn::config
