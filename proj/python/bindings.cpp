#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nspvi/cli.hpp"
#include "nspvi/config.hpp"
#include "nspvi/error.hpp"
#include "nspvi/io.hpp"
#include "nspvi/predict.hpp"
#include "nspvi/simulate.hpp"
#include "nspvi/weibull.hpp"

namespace py = pybind11;
using namespace nspvi;

namespace {

// A sequence crosses the boundary as (window, [(t, k), ...]).
using PySeq = std::pair<double, std::vector<std::pair<double, int>>>;

EventSeq to_seq(const PySeq& s) {
  EventSeq out;
  out.window = s.first;
  for (const auto& [t, k] : s.second) out.events.push_back({t, k});
  return out;
}

PySeq from_seq(const EventSeq& s) {
  PySeq out{s.window, {}};
  for (const auto& e : s.events) out.second.emplace_back(e.t, e.type);
  return out;
}

std::vector<EventSeq> to_seqs(const std::vector<PySeq>& v) {
  std::vector<EventSeq> out;
  for (const auto& s : v) out.push_back(to_seq(s));
  return out;
}

RunConfig config_from(const std::string& json_text) {
  return json_text.empty() ? default_run_config() : parse_run_config(json_text);
}

}  // namespace

PYBIND11_MODULE(_nspvi, m) {
  m.doc() = "Deep Neyman-Scott processes: simulation, posterior sampling and prediction";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<WeibullKernel>(m, "WeibullKernel")
      .def(py::init([](double weight, double shape, double scale) {
             return WeibullKernel{weight, shape, scale};
           }),
           py::arg("weight"), py::arg("shape"), py::arg("scale"))
      .def_readwrite("weight", &WeibullKernel::weight)
      .def_readwrite("shape", &WeibullKernel::shape)
      .def_readwrite("scale", &WeibullKernel::scale)
      .def("__repr__", [](const WeibullKernel& k) {
        return "WeibullKernel(weight=" + std::to_string(k.weight) +
               ", shape=" + std::to_string(k.shape) + ", scale=" + std::to_string(k.scale) + ")";
      });

  m.def("weibull_eval", &weibull_eval, py::arg("kernel"), py::arg("x"));
  m.def("weibull_integral", &weibull_integral, py::arg("kernel"), py::arg("a"), py::arg("b"));

  m.def("top_rate_mle", &top_rate_mle, py::arg("counts"), py::arg("window"));
  m.def("mean_time", &mean_time, py::arg("times"));
  m.def("majority_type", &majority_type, py::arg("types"), py::arg("num_types"));

  m.def("default_config", [] { return run_config_to_string(default_run_config()); },
        "Default run configuration as JSON text.");

  m.def(
      "generate",
      [](const std::string& config_json) {
        const Splits s = generate_splits(config_from(config_json));
        py::dict out;
        for (const auto& [name, data] :
             {std::pair{"train", &s.train}, {"validation", &s.validation}, {"test", &s.test}}) {
          std::vector<PySeq> v;
          for (const auto& seq : *data) v.push_back(from_seq(seq));
          out[name] = v;
        }
        return out;
      },
      py::arg("config_json") = "",
      "Synthetic train/validation/test splits as (window, [(t, k), ...]) tuples.");

  m.def(
      "read_dataset",
      [](const std::string& path, int num_types) {
        std::vector<PySeq> v;
        for (const auto& s : read_dataset(path, num_types)) v.push_back(from_seq(s));
        return v;
      },
      py::arg("path"), py::arg("num_types"));
  m.def(
      "write_dataset",
      [](const std::string& path, const std::vector<PySeq>& data) {
        write_dataset(path, to_seqs(data));
      },
      py::arg("path"), py::arg("data"));

  m.def(
      "predict",
      [](const std::string& checkpoint, const std::vector<PySeq>& data, const std::string& sampler,
         int samples, std::uint64_t seed) {
        const Posteriors post = load_checkpoint(checkpoint);
        PredictOptions o;
        o.sampler = parse_sampler(sampler);
        o.samples = samples;
        o.seed = seed;
        std::vector<EventSeq> seqs = to_seqs(data);
        for (const auto& s : seqs) s.validate(post.model.count(0));
        py::list out;
        py::gil_scoped_release release;
        const auto records = predict_dataset(post, seqs, o);
        py::gil_scoped_acquire acquire;
        for (const auto& r : records) {
          py::dict d;
          d["seq_id"] = r.seq_id;
          d["n"] = r.n;
          d["t_true"] = r.t_true;
          d["k_true"] = r.k_true;
          d["t_hat"] = r.t_hat;
          d["k_hat"] = r.k_hat;
          d["failed"] = r.failed;
          out.append(d);
        }
        return out;
      },
      py::arg("checkpoint"), py::arg("data"), py::arg("sampler") = "usap", py::arg("samples") = 16,
      py::arg("seed") = 1, "Next-event predictions for every prefix of every sequence.");

  // Subcommands; each takes the run configuration as JSON text.
  m.def("cmd_generate", [](const std::string& c) { return cmd_generate(config_from(c)); },
        py::arg("config_json") = "");
  m.def(
      "cmd_train",
      [](const std::string& c, std::optional<std::string> resume) {
        py::gil_scoped_release release;
        return cmd_train(config_from(c), resume);
      },
      py::arg("config_json") = "", py::arg("resume") = std::nullopt);
  m.def(
      "cmd_predict",
      [](const std::string& c, const std::string& sampler, int samples,
         std::optional<std::string> checkpoint) {
        py::gil_scoped_release release;
        return cmd_predict(config_from(c), parse_sampler(sampler), samples, checkpoint);
      },
      py::arg("config_json") = "", py::arg("sampler") = "usap", py::arg("samples") = 16,
      py::arg("checkpoint") = std::nullopt);
  m.def(
      "cmd_bench",
      [](const std::string& c, std::optional<std::string> checkpoint) {
        py::gil_scoped_release release;
        return cmd_bench(config_from(c), checkpoint);
      },
      py::arg("config_json") = "", py::arg("checkpoint") = std::nullopt);
  m.def("cmd_plot", [](const std::string& c) { return cmd_plot(config_from(c)); },
        py::arg("config_json") = "");
}
