#include "ntklab/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "ntklab/error.hpp"
#include "ntklab/hash.hpp"

namespace ntklab {

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("`" + key + "` expects a non-negative integer, got `" + v + "`");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("`" + key + "` expects a non-negative integer, got `" + v + "`");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("`" + key + "` expects a real number, got `" + v + "`");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("`" + key + "` expects true or false, got `" + v + "`");
}

template <typename Enum>
Enum parse_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, Enum>> options) {
  std::string valid;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    valid += valid.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("`" + key + "` must be one of {" + valid + "}, got `" + v + "`");
}

Shape parse_shape(const std::string& key, const std::string& v) {
  Shape shape;
  for (const auto& part : split(v, 'x')) shape.push_back(parse_size(key, part));
  if (shape.size() != 3) throw ConfigError("`" + key + "` expects CxHxW, got `" + v + "`");
  return shape;
}

std::string join_paths(const std::vector<std::filesystem::path>& paths) {
  std::string out;
  for (const auto& p : paths) out += (out.empty() ? "" : ";") + p.string();
  return out;
}

std::vector<std::filesystem::path> parse_paths(const std::string& v) {
  std::vector<std::filesystem::path> out;
  if (trim(v).empty()) return out;
  for (const auto& part : split(v, ';')) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

std::string schedule_to_string(const std::vector<TaskEntry>& schedule) {
  std::string out;
  for (const auto& t : schedule) out += (out.empty() ? "" : ", ") + t.to_string();
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct KeyHandler {
  std::string key;
  Setter set;
  Getter get;
};

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = {
      {"model.kind",
       [](auto& c, auto& k, auto& v) {
         c.model.kind = parse_enum<ModelKind>(k, v, {{"cnn3", ModelKind::cnn3}, {"mlp", ModelKind::mlp}});
       },
       [](auto& c) { return to_string(c.model.kind); }},
      {"model.width", [](auto& c, auto& k, auto& v) { c.model.width = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.model.width); }},
      {"model.mlp_depth", [](auto& c, auto& k, auto& v) { c.model.mlp_depth = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.model.mlp_depth); }},
      {"init",
       [](auto& c, auto& k, auto& v) {
         c.regime.init = parse_enum<InitScheme>(k, v,
                                                {{"kaiming_uniform", InitScheme::kaiming_uniform},
                                                 {"kaiming_normal", InitScheme::kaiming_normal},
                                                 {"ntk_like", InitScheme::ntk_like}});
       },
       [](auto& c) { return to_string(c.regime.init); }},
      {"lr", [](auto& c, auto& k, auto& v) { c.regime.lr_base = parse_real(k, v); },
       [](auto& c) { return format_double(c.regime.lr_base); }},
      {"lr.scaling",
       [](auto& c, auto& k, auto& v) {
         c.regime.lr_scaling = parse_enum<LrScaling>(
             k, v, {{"none", LrScaling::none}, {"inverse_width", LrScaling::inverse_width}});
       },
       [](auto& c) { return to_string(c.regime.lr_scaling); }},
      {"lr.reference_width", [](auto& c, auto& k, auto& v) { c.regime.reference_width = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.regime.reference_width); }},
      {"loss",
       [](auto& c, auto& k, auto& v) {
         c.loss = parse_enum<LossKind>(k, v, {{"cross_entropy", LossKind::cross_entropy}, {"squared", LossKind::squared}});
       },
       [](auto& c) { return to_string(c.loss); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.batch_size = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.batch_size); }},
      {"schedule",
       [](auto& c, auto&, auto& v) {
         c.schedule.clear();
         for (const auto& part : split(v, ',')) c.schedule.push_back(TaskEntry::parse(part));
       },
       [](auto& c) { return schedule_to_string(c.schedule); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.epochs_per_task = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.epochs_per_task); }},
      {"sampling",
       [](auto& c, auto& k, auto& v) {
         c.sampling = parse_enum<SamplingMode>(k, v, {{"epoch_pools", SamplingMode::epoch_pools}, {"iid", SamplingMode::iid}});
       },
       [](auto& c) { return to_string(c.sampling); }},
      {"probe.size", [](auto& c, auto& k, auto& v) { c.probe.size = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.probe.size); }},
      {"probe.scalarization",
       [](auto& c, auto& k, auto& v) {
         c.probe.scalarization = parse_enum<Scalarization>(k, v,
                                                           {{"true_class_logit", Scalarization::true_class_logit},
                                                            {"sum_logits", Scalarization::sum_logits},
                                                            {"mean_logits", Scalarization::mean_logits}});
       },
       [](auto& c) { return to_string(c.probe.scalarization); }},
      {"probe.cadence", [](auto& c, auto& k, auto& v) { c.probe.cadence = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.probe.cadence); }},
      {"probe.velocity_dt", [](auto& c, auto& k, auto& v) { c.probe.velocity_dt = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.probe.velocity_dt); }},
      {"probe.centered", [](auto& c, auto& k, auto& v) { c.probe.centered = parse_bool(k, v); },
       [](auto& c) { return std::string(c.probe.centered ? "true" : "false"); }},
      {"probe.label_kernel",
       [](auto& c, auto& k, auto& v) {
         c.probe.label_kernel =
             parse_enum<LabelKernel>(k, v, {{"one_hot", LabelKernel::one_hot}, {"signed", LabelKernel::signed_binary}});
       },
       [](auto& c) { return std::string(c.probe.label_kernel == LabelKernel::one_hot ? "one_hot" : "signed"); }},
      {"eval.max_test", [](auto& c, auto& k, auto& v) { c.eval_max_test = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.eval_max_test); }},
      {"data.source",
       [](auto& c, auto& k, auto& v) {
         c.data.source = parse_enum<DataSource>(k, v, {{"synthetic", DataSource::synthetic}, {"cifar", DataSource::cifar}});
       },
       [](auto& c) { return std::string(c.data.source == DataSource::synthetic ? "synthetic" : "cifar"); }},
      {"data.classes", [](auto& c, auto& k, auto& v) { c.data.synthetic.classes = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.data.synthetic.classes); }},
      {"data.per_class", [](auto& c, auto& k, auto& v) { c.data.synthetic.per_class = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.data.synthetic.per_class); }},
      {"data.test_per_class", [](auto& c, auto& k, auto& v) { c.data.test_per_class = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.data.test_per_class); }},
      {"data.image_shape", [](auto& c, auto& k, auto& v) { c.data.synthetic.image_shape = parse_shape(k, v); },
       [](auto& c) {
         const auto& s = c.data.synthetic.image_shape;
         std::string out;
         for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
         return out;
       }},
      {"data.noise", [](auto& c, auto& k, auto& v) { c.data.synthetic.noise = parse_real(k, v); },
       [](auto& c) { return format_double(c.data.synthetic.noise); }},
      {"data.seed", [](auto& c, auto& k, auto& v) { c.data.synthetic.seed = parse_u64(k, v); },
       [](auto& c) { return std::to_string(c.data.synthetic.seed); }},
      {"data.train", [](auto& c, auto&, auto& v) { c.data.train_files = parse_paths(v); },
       [](auto& c) { return join_paths(c.data.train_files); }},
      {"data.test", [](auto& c, auto&, auto& v) { c.data.test_files = parse_paths(v); },
       [](auto& c) { return join_paths(c.data.test_files); }},
      {"data.cifar_per_class", [](auto& c, auto& k, auto& v) { c.data.cifar_per_class = parse_size(k, v); },
       [](auto& c) { return std::to_string(c.data.cifar_per_class); }},
      {"iteration_limit",
       [](auto& c, auto& k, auto& v) {
         if (v == "none") {
           c.iteration_limit.reset();
         } else {
           c.iteration_limit = parse_size(k, v);
         }
       },
       [](auto& c) { return c.iteration_limit ? std::to_string(*c.iteration_limit) : std::string("none"); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_u64(k, v); },
       [](auto& c) { return std::to_string(c.seed); }},
      {"out", [](auto& c, auto&, auto& v) { c.output_dir = v; }, [](auto& c) { return c.output_dir.string(); }},
  };
  return table;
}

}  // namespace

TaskDistribution TaskEntry::distribution(std::size_t num_classes) const {
  switch (kind) {
    case Kind::window: return window_family(start, width, num_classes);
    case Kind::mixture: {
      if (num_classes < 10) throw ConfigError("mixture tasks need a dataset with at least 10 classes");
      return mixture_family(alpha);
    }
    case Kind::classes: {
      for (std::size_t c : classes) {
        if (c >= num_classes) throw ConfigError("task class " + std::to_string(c) + " exceeds dataset classes");
      }
      return TaskDistribution::uniform(classes);
    }
  }
  throw ConfigError("unknown task kind");
}

std::string TaskEntry::to_string() const {
  std::string out;
  switch (kind) {
    case Kind::window: out = "window:" + std::to_string(start) + ":" + std::to_string(width); break;
    case Kind::mixture: out = "mixture:" + format_double(alpha); break;
    case Kind::classes:
      out = "classes:";
      for (std::size_t i = 0; i < classes.size(); ++i) out += (i ? "+" : "") + std::to_string(classes[i]);
      break;
  }
  if (epochs) out += "@" + std::to_string(*epochs);
  return out;
}

TaskEntry TaskEntry::parse(const std::string& raw) {
  std::string text = trim(raw);
  TaskEntry t;
  if (const auto at = text.find('@'); at != std::string::npos) {
    t.epochs = parse_size("schedule", trim(std::string_view(text).substr(at + 1)));
    text = trim(std::string_view(text).substr(0, at));
  }
  const auto parts = split(text, ':');
  if (parts[0] == "window" && parts.size() == 3) {
    t.kind = Kind::window;
    t.start = parse_size("schedule", parts[1]);
    t.width = parse_size("schedule", parts[2]);
  } else if (parts[0] == "mixture" && parts.size() == 2) {
    t.kind = Kind::mixture;
    t.alpha = parse_real("schedule", parts[1]);
  } else if (parts[0] == "classes" && parts.size() == 2) {
    t.kind = Kind::classes;
    for (const auto& c : split(parts[1], '+')) t.classes.push_back(parse_size("schedule", c));
  } else {
    throw ConfigError("cannot parse schedule entry `" + text +
                      "` (expected window:START:WIDTH, mixture:ALPHA or classes:A+B, optionally @EPOCHS)");
  }
  return t;
}

void ExperimentConfig::validate() const {
  if (model.width == 0) throw ConfigError("model.width must be positive");
  if (!(regime.lr_base >= 0.0)) throw ConfigError("lr must be non-negative");
  if (regime.reference_width == 0) throw ConfigError("lr.reference_width must be positive");
  if (schedule.empty()) throw ConfigError("schedule needs at least one task");
  for (const auto& t : schedule) {
    if (t.epochs && *t.epochs == 0) throw ConfigError("task `" + t.to_string() + "` has zero epochs");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (probe.size == 0) throw ConfigError("probe.size must be positive");
  if (probe.cadence == 0) throw ConfigError("probe.cadence must be positive");
  if (probe.velocity_dt == 0) throw ConfigError("probe.velocity_dt must be at least 1");
  if (data.source == DataSource::cifar && data.train_files.empty()) {
    throw ConfigError("data.source = cifar needs data.train");
  }
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& h : handlers()) {
    if (h.key == key) {
      h.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key `" + key + "`");
}

ExperimentConfig config_from_key_values(const KeyValues& entries) {
  ExperimentConfig cfg;
  cfg.schedule = {TaskEntry::parse("window:0:5"), TaskEntry::parse("window:5:5")};
  for (const auto& [k, v] : entries) apply_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_key_values(read_key_values(path));
}

KeyValues config_to_key_values(const ExperimentConfig& cfg) {
  KeyValues out;
  for (const auto& h : handlers()) out.emplace_back(h.key, h.get(cfg));
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  Fnv1a h;
  for (const auto& [k, v] : config_to_key_values(cfg)) {
    if (k == "out") continue;
    h.add_string(k);
    h.add_string(v);
  }
  return h.value();
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& h : handlers()) out.push_back(h.key);
    return out;
  }();
  return keys;
}

}  // namespace ntklab
