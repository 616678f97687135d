#include "nspvi/config.hpp"

#include <set>

#include <json.hpp>

#include "nspvi/error.hpp"
#include "nspvi/io.hpp"

namespace nspvi {

using nlohmann::json;

std::vector<int> preset_counts(const std::string& preset, int num_types,
                               const std::vector<int>& hidden_widths) {
  int depth = 0;
  if (preset == "1-hidden") {
    depth = 1;
  } else if (preset == "2-hidden") {
    depth = 2;
  } else {
    throw ConfigError("architecture.preset: expected \"1-hidden\" or \"2-hidden\", got \"" +
                      preset + "\"");
  }
  if (num_types < 1) throw ConfigError("architecture.num_types: must be >= 1");
  std::vector<int> counts{num_types};
  for (int l = 0; l < depth; ++l) {
    int w = 1;
    if (!hidden_widths.empty()) {
      if (hidden_widths.size() != static_cast<std::size_t>(depth)) {
        throw ConfigError("architecture.hidden_widths: expected " + std::to_string(depth) +
                          " entries");
      }
      w = hidden_widths[static_cast<std::size_t>(l)];
    }
    if (w < 1) throw ConfigError("architecture.hidden_widths: widths must be >= 1");
    counts.push_back(w);
  }
  return counts;
}

RunConfig default_run_config() {
  RunConfig c;
  c.train.fix_shape = true;
  return c;
}

namespace {

// One JSON object whose keys must all be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(at(key) + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(at(key) + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    used_.insert(key);
    return Section(j_.at(key), at(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(at(key.c_str()) + ": unknown key");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "<config>" : path_; }
  std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> used_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig c = default_run_config();
  Section top(root, "");
  top.get("seed", c.seed);

  if (top.has("architecture")) {
    Section a = top.child("architecture");
    std::string preset;
    int num_types = c.counts.front();
    std::vector<int> widths;
    std::vector<int> counts;
    a.get("preset", preset);
    a.get("num_types", num_types);
    a.get("hidden_widths", widths);
    a.get("counts", counts);
    a.finish();
    if (!counts.empty()) {
      require(preset.empty(), "architecture: give either counts or preset, not both");
      require(counts.size() >= 2, "architecture.counts: need at least one hidden layer");
      for (int k : counts) require(k >= 1, "architecture.counts: every count must be >= 1");
      c.counts = counts;
    } else {
      c.counts = preset_counts(preset.empty() ? "1-hidden" : preset, num_types, widths);
    }
  }
  if (top.has("kernel")) {
    Section k = top.child("kernel");
    k.get("fix_shape", c.train.fix_shape);
    k.finish();
  }
  if (top.has("usap")) {
    Section u = top.child("usap");
    auto& d = c.train.usap_dims;
    u.get("d_k", d.d_k);
    u.get("d_v", d.d_v);
    u.get("d_model", d.d_model);
    u.get("d_hidden", d.d_hidden);
    u.get("heads", d.heads);
    u.finish();
    require(d.d_k >= 1 && d.d_v >= 1 && d.d_model >= 2 && d.d_hidden >= 1 && d.heads >= 1,
            "usap: dimensions must be positive (d_model >= 2)");
  }
  if (top.has("train")) {
    Section t = top.child("train");
    auto& tc = c.train;
    t.get("iterations", tc.iterations);
    t.get("model_step", tc.model_step);
    t.get("variational_step", tc.variational_step);
    t.get("batch_size", tc.batch_size);
    t.get("burn_in", tc.burn_in);
    t.get("thin", tc.thin);
    t.get("validate_every", tc.validate_every);
    t.get("patience", tc.patience);
    t.get("validation_samples", tc.validation_samples);
    t.get("train_model", tc.train_model);
    t.get("train_unsp", tc.train_unsp);
    t.get("train_usap", tc.train_usap);
    if (t.has("adam")) {
      Section ad = t.child("adam");
      ad.get("beta1", tc.adam.beta1);
      ad.get("beta2", tc.adam.beta2);
      ad.get("eps", tc.adam.eps);
      ad.finish();
    }
    t.finish();
    require(tc.iterations >= 0, "train.iterations: must be >= 0");
    require(tc.model_step > 0.0 && tc.variational_step > 0.0, "train: step sizes must be > 0");
    require(tc.batch_size >= 0, "train.batch_size: must be >= 0");
    require(tc.burn_in >= 0 && tc.thin >= 0, "train: burn_in and thin must be >= 0");
    require(tc.patience >= 1, "train.patience: must be >= 1");
    require(tc.validate_every >= 1, "train.validate_every: must be >= 1");
    require(tc.validation_samples >= 1, "train.validation_samples: must be >= 1");
  }
  if (top.has("generate")) {
    Section g = top.child("generate");
    auto& gc = c.generate;
    g.get("window", gc.window);
    g.get("top_rate", gc.top_rate);
    g.get("train", gc.train);
    g.get("validation", gc.validation);
    g.get("test", gc.test);
    if (g.has("kernel")) {
      Section k = g.child("kernel");
      k.get("weight", gc.kernel.weight);
      k.get("shape", gc.kernel.shape);
      k.get("scale", gc.kernel.scale);
      k.finish();
    }
    g.finish();
    require(gc.window > 0.0, "generate.window: must be > 0");
    require(gc.top_rate >= 0.0, "generate.top_rate: must be >= 0");
    require(gc.kernel.weight >= 0.0 && gc.kernel.shape > 0.0 && gc.kernel.scale > 0.0,
            "generate.kernel: weight >= 0, shape > 0, scale > 0 required");
    require(gc.train >= 0 && gc.validation >= 0 && gc.test >= 0,
            "generate: split counts must be >= 0");
  }
  if (top.has("bench")) {
    Section b = top.child("bench");
    auto& bc = c.bench;
    std::vector<std::string> samplers;
    b.get("samples", bc.samples);
    b.get("samplers", samplers);
    b.get("burn_in", bc.burn_in);
    b.get("thin", bc.thin);
    b.get("horizon_factor", bc.horizon_factor);
    b.get("max_retries", bc.max_retries);
    b.get("max_sequences", bc.max_sequences);
    b.get("match_budgets", bc.match_budgets);
    b.get("max_matched_samples", bc.max_matched_samples);
    b.finish();
    if (!samplers.empty()) {
      bc.samplers.clear();
      for (const auto& s : samplers) {
        try {
          bc.samplers.push_back(parse_sampler(s));
        } catch (const ArgumentError& e) {
          throw ConfigError(std::string("bench.samplers: ") + e.what());
        }
      }
    }
    require(!bc.samples.empty(), "bench.samples: need at least one sample size");
    for (int s : bc.samples) require(s >= 1, "bench.samples: sample sizes must be >= 1");
    require(bc.burn_in >= 0 && bc.thin >= 0, "bench: burn_in and thin must be >= 0");
    require(bc.horizon_factor > 0.0, "bench.horizon_factor: must be > 0");
    require(bc.max_retries >= 0 && bc.max_sequences >= 0, "bench: counts must be >= 0");
  }
  if (top.has("paths")) {
    Section p = top.child("paths");
    p.get("data", c.paths.data);
    p.get("out", c.paths.out);
    p.finish();
  }
  top.finish();
  c.train.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_run_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string run_config_to_string(const RunConfig& c) {
  json samplers = json::array();
  for (auto s : c.bench.samplers) samplers.push_back(to_string(s));
  const auto& t = c.train;
  json j = {
      {"seed", c.seed},
      {"architecture", {{"counts", c.counts}}},
      {"kernel", {{"fix_shape", t.fix_shape}}},
      {"usap",
       {{"d_k", t.usap_dims.d_k},
        {"d_v", t.usap_dims.d_v},
        {"d_model", t.usap_dims.d_model},
        {"d_hidden", t.usap_dims.d_hidden},
        {"heads", t.usap_dims.heads}}},
      {"train",
       {{"iterations", t.iterations},
        {"model_step", t.model_step},
        {"variational_step", t.variational_step},
        {"batch_size", t.batch_size},
        {"burn_in", t.burn_in},
        {"thin", t.thin},
        {"validate_every", t.validate_every},
        {"patience", t.patience},
        {"validation_samples", t.validation_samples},
        {"train_model", t.train_model},
        {"train_unsp", t.train_unsp},
        {"train_usap", t.train_usap},
        {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}}},
      {"generate",
       {{"window", c.generate.window},
        {"top_rate", c.generate.top_rate},
        {"kernel",
         {{"weight", c.generate.kernel.weight},
          {"shape", c.generate.kernel.shape},
          {"scale", c.generate.kernel.scale}}},
        {"train", c.generate.train},
        {"validation", c.generate.validation},
        {"test", c.generate.test}}},
      {"bench",
       {{"samples", c.bench.samples},
        {"samplers", samplers},
        {"burn_in", c.bench.burn_in},
        {"thin", c.bench.thin},
        {"horizon_factor", c.bench.horizon_factor},
        {"max_retries", c.bench.max_retries},
        {"max_sequences", c.bench.max_sequences},
        {"match_budgets", c.bench.match_budgets},
        {"max_matched_samples", c.bench.max_matched_samples}}},
      {"paths", {{"data", c.paths.data}, {"out", c.paths.out}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace nspvi
