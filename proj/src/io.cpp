#include "nspvi/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nspvi/error.hpp"

namespace nspvi {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& field,
                             const std::string& what) {
  throw ParseError(source + ":" + std::to_string(line) + ": field '" + field + "': " + what);
}

double number_field(const json& obj, const char* key, const std::string& source, std::size_t line,
                    const std::string& field) {
  if (!obj.contains(key)) parse_fail(source, line, field, "missing");
  const auto& v = obj.at(key);
  if (!v.is_number()) parse_fail(source, line, field, "not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) parse_fail(source, line, field, "not finite");
  return d;
}

}  // namespace

std::vector<EventSeq> parse_dataset(std::istream& in, int num_types, const std::string& source) {
  std::vector<EventSeq> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) parse_fail(source, line, "<root>", "expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (key != "T" && key != "events") parse_fail(source, line, key, "unknown key");
    }
    EventSeq seq;
    seq.window = number_field(obj, "T", source, line, "T");
    if (!(seq.window > 0.0)) parse_fail(source, line, "T", "must be positive");
    if (!obj.contains("events") || !obj.at("events").is_array()) {
      parse_fail(source, line, "events", "missing or not an array");
    }
    const auto& events = obj.at("events");
    double prev = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const std::string where = "events[" + std::to_string(i) + "]";
      const auto& e = events[i];
      if (!e.is_object()) parse_fail(source, line, where, "expected an object");
      for (const auto& [key, value] : e.items()) {
        if (key != "t" && key != "k") parse_fail(source, line, where + "." + key, "unknown key");
      }
      const double t = number_field(e, "t", source, line, where + ".t");
      if (!e.contains("k") || !e.at("k").is_number_integer()) {
        parse_fail(source, line, where + ".k", "missing or not an integer");
      }
      const auto k = e.at("k").get<long long>();
      if (t <= 0.0 || t > seq.window) parse_fail(source, line, where + ".t", "outside (0, T]");
      if (t < prev) parse_fail(source, line, where + ".t", "events not sorted by time");
      if (k < 1 || (num_types > 0 && k > num_types)) {
        parse_fail(source, line, where + ".k",
                   "type " + std::to_string(k) + " outside [1, " +
                       (num_types > 0 ? std::to_string(num_types) : std::string("K")) + "]");
      }
      prev = t;
      seq.events.push_back({t, static_cast<int>(k)});
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<EventSeq> read_dataset(const std::string& path, int num_types) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_dataset(in, num_types, path);
}

void write_dataset(std::ostream& out, const std::vector<EventSeq>& data) {
  for (const auto& seq : data) {
    json events = json::array();
    for (const auto& e : seq.events) events.push_back({{"t", e.t}, {"k", e.type}});
    json obj;
    obj["T"] = seq.window;
    obj["events"] = std::move(events);
    out << obj.dump() << '\n';
  }
}

void write_dataset(const std::string& path, const std::vector<EventSeq>& data) {
  std::ostringstream os;
  write_dataset(os, data);
  write_text_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json kernel_json(const WeibullKernel& k) { return json::array({k.weight, k.shape, k.scale}); }

WeibullKernel kernel_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("checkpoint: kernel must be [p, k, lam]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json table_json(const KernelTable& t) {
  json ks = json::array();
  for (const auto& k : t.kernels) ks.push_back(kernel_json(k));
  return {{"from", t.from}, {"to", t.to}, {"kernels", std::move(ks)}};
}

KernelTable table_from(const json& j) {
  KernelTable t(j.at("from").get<int>(), j.at("to").get<int>());
  const auto& ks = j.at("kernels");
  if (ks.size() != t.kernels.size()) throw ParseError("checkpoint: kernel table size mismatch");
  for (std::size_t i = 0; i < ks.size(); ++i) t.kernels[i] = kernel_from(ks[i]);
  return t;
}

json upward_json(const UpwardTables& u) {
  json tables = json::array();
  for (const auto& t : u.kernels) tables.push_back(table_json(t));
  return {{"counts", u.counts}, {"kernels", std::move(tables)}, {"base", u.base}};
}

UpwardTables upward_from(const json& j) {
  UpwardTables u;
  u.counts = j.at("counts").get<std::vector<int>>();
  for (const auto& t : j.at("kernels")) u.kernels.push_back(table_from(t));
  u.base = j.at("base").get<std::vector<std::vector<double>>>();
  if (u.kernels.size() + 1 != u.counts.size() || u.base.size() + 1 != u.counts.size()) {
    throw ParseError("checkpoint: upward tables do not match the layer counts");
  }
  return u;
}

}  // namespace

std::string checkpoint_to_string(const Posteriors& post) {
  json j;
  j["format"] = "nspvi-checkpoint";
  j["version"] = kCheckpointVersion;
  j["links"] = {{"kernel_tables", "natural values"},
                {"kernel_optimizer", "p, k, lam = 0.001 + softplus(raw)"},
                {"rate_optimizer", "rate = 1e-08 + softplus(raw)"},
                {"usap_heads", "p, k, lam = 0.001 + softplus(W h + b)"},
                {"usap_base", "rate = 1e-08 + softplus(base_raw)"}};
  j["counts"] = post.model.counts;

  json model;
  json down = json::array();
  for (const auto& t : post.model.down) down.push_back(table_json(t));
  model["down"] = std::move(down);
  model["top_rates"] = post.model.top_rates;
  model["vpp"] = upward_json(post.model.vpp);
  model["obs_background"] = post.model.obs_background;
  j["model"] = std::move(model);
  j["unsp"] = upward_json(post.unsp);

  const auto& u = post.usap;
  json arrays = json::object();
  u.for_each_array([&arrays](const std::string& name, const ad::Matrix& m) {
    arrays[name] = {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
  });
  j["usap"] = {{"counts", u.counts},
               {"fix_shape", u.fix_shape},
               {"dims",
                {{"d_k", u.dims.d_k},
                 {"d_v", u.dims.d_v},
                 {"d_model", u.dims.d_model},
                 {"d_hidden", u.dims.d_hidden},
                 {"heads", u.dims.heads}}},
               {"arrays", std::move(arrays)}};
  return j.dump(1) + "\n";
}

Posteriors checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "nspvi-checkpoint") throw ParseError("checkpoint: unknown format");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError("checkpoint: unsupported version " + j.at("version").dump());
    }
    Posteriors p;
    p.model.counts = j.at("counts").get<std::vector<int>>();
    const auto& m = j.at("model");
    for (const auto& t : m.at("down")) p.model.down.push_back(table_from(t));
    p.model.top_rates = m.at("top_rates").get<std::vector<double>>();
    p.model.vpp = upward_from(m.at("vpp"));
    p.model.obs_background = m.at("obs_background").get<double>();
    p.model.validate();
    p.unsp = upward_from(j.at("unsp"));

    const auto& u = j.at("usap");
    p.usap.counts = u.at("counts").get<std::vector<int>>();
    p.usap.fix_shape = u.at("fix_shape").get<bool>();
    const auto& d = u.at("dims");
    p.usap.dims = {d.at("d_k").get<int>(), d.at("d_v").get<int>(), d.at("d_model").get<int>(),
                   d.at("d_hidden").get<int>(), d.at("heads").get<int>()};
    // Build the array layout, then fill every array by name.
    RngStream rng(0);
    p.usap = UsapParams::init(p.usap.counts, p.usap.dims, p.usap.fix_shape, 1.0, 1.0, rng);
    const auto& arrays = u.at("arrays");
    std::size_t seen = 0;
    p.usap.for_each_array([&](const std::string& name, ad::Matrix& mat) {
      if (!arrays.contains(name)) throw ParseError("checkpoint: missing USAP array " + name);
      const auto& a = arrays.at(name);
      if (a.at("rows").get<std::size_t>() != mat.rows ||
          a.at("cols").get<std::size_t>() != mat.cols) {
        throw ParseError("checkpoint: USAP array " + name + " has the wrong shape");
      }
      mat.data = a.at("data").get<std::vector<double>>();
      if (mat.data.size() != mat.rows * mat.cols) {
        throw ParseError("checkpoint: USAP array " + name + " has the wrong size");
      }
      ++seen;
    });
    if (seen != arrays.size()) throw ParseError("checkpoint: unexpected USAP arrays");
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Posteriors& post) {
  write_text_file(path, checkpoint_to_string(post));
}

Posteriors load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint '" + path + "' not found");
  return checkpoint_from_string(read_text_file(path));
}

// ---------------------------------------------------------------------------
// CSV

void write_train_log(std::ostream& out, const std::vector<TrainLogRecord>& log) {
  const std::size_t rates = log.empty() ? 0 : log.front().top_rates.size();
  out << "iter,joint_loglik,q_loglik_unsp,q_loglik_usap";
  for (std::size_t k = 0; k < rates; ++k) out << ",mu_" << k + 1;
  out << ",wall_ms\n";
  for (const auto& r : log) {
    out << r.iteration << ',' << num(r.joint_loglik) << ',' << num(r.q_unsp) << ','
        << num(r.q_usap);
    for (double mu : r.top_rates) out << ',' << num(mu);
    out << ',' << num(r.wall_ms) << '\n';
  }
}

void write_validation_log(std::ostream& out, const std::vector<ValidationRecord>& log) {
  out << "iter,score\n";
  for (const auto& r : log) out << r.iteration << ',' << num(r.score) << '\n';
}

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records) {
  out << "seq_id,n,t_true,k_true,t_hat,k_hat,sampler,S,wall_ms,failed\n";
  for (const auto& r : records) {
    out << r.seq_id << ',' << r.n << ',' << num(r.t_true) << ',' << r.k_true << ','
        << (r.failed ? std::string("nan") : num(r.t_hat)) << ',' << (r.failed ? 0 : r.k_hat)
        << ',' << to_string(r.sampler) << ',' << r.samples << ',' << num(r.wall_ms) << ','
        << (r.failed ? 1 : 0) << '\n';
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory for '" + path + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace nspvi
