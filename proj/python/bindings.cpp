#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mvae/checkpoint.hpp"
#include "mvae/commands.hpp"
#include "mvae/data.hpp"
#include "mvae/error.hpp"
#include "mvae/evaluate.hpp"
#include "mvae/metrics.hpp"
#include "mvae/posterior.hpp"
#include "mvae/train.hpp"

namespace py = pybind11;
using namespace mvae;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<int, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) {
    return Matrix(1, static_cast<std::size_t>(a.shape(0)),
                  std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw ContractError("expected a 1-d or 2-d array");
  return Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.storage().begin(), m.storage().end(), out.mutable_data());
  return out;
}

Array to_array(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::span<const int> as_span(const Labels& l) { return {l.data(), static_cast<std::size_t>(l.size())}; }

Labels to_labels(const std::vector<int>& v) {
  Labels out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  for (const auto& m : r.metrics()) d[py::str(m.name)] = m.value;
  return d;
}

py::array image_array(const ImageGrid& g) {
  const std::size_t ch = g.tile().channels;
  std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(g.pixel_height()),
                                 static_cast<py::ssize_t>(g.pixel_width())};
  if (ch > 1) shape.push_back(static_cast<py::ssize_t>(ch));
  Array out(shape);
  std::copy(g.payload().begin(), g.payload().end(), out.mutable_data());
  return out;
}

struct PosteriorInputs {
  Matrix mu, logvar, coupling;
  bool has_coupling;
  bool couple_mean;
  PosteriorParams params() const { return {mu, logvar, has_coupling ? &coupling : nullptr, couple_mean}; }
};

PosteriorInputs posterior_inputs(const Array& mu, const Array& logvar, const std::optional<Array>& c,
                                 bool couple_mean) {
  return {to_matrix(mu), to_matrix(logvar), c ? to_matrix(*c) : Matrix(), c.has_value(), couple_mean};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Coupled-posterior variational autoencoder core";

  auto base = py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);
  (void)base;

  m.def(
      "kl_divergence",
      [](const Array& mu, const Array& logvar, std::optional<Array> coupling, bool couple_mean) {
        const auto in = posterior_inputs(mu, logvar, coupling, couple_mean);
        return to_array(kl_divergence(in.params()));
      },
      py::arg("mu"), py::arg("logvar"), py::arg("coupling") = py::none(), py::arg("couple_mean") = true,
      "Per-row KL(q || N(0, I)); coupling=None gives the diagonal posterior.");

  m.def(
      "reparameterize",
      [](const Array& mu, const Array& logvar, const Array& eps, std::optional<Array> coupling,
         bool couple_mean) {
        const auto in = posterior_inputs(mu, logvar, coupling, couple_mean);
        return to_array(reparameterize(in.params(), to_matrix(eps)));
      },
      py::arg("mu"), py::arg("logvar"), py::arg("eps"), py::arg("coupling") = py::none(),
      py::arg("couple_mean") = true);

  m.def(
      "effective_mean",
      [](const Array& mu, const Array& logvar, std::optional<Array> coupling, bool couple_mean) {
        const auto in = posterior_inputs(mu, logvar, coupling, couple_mean);
        return to_array(effective_mean(in.params()));
      },
      py::arg("mu"), py::arg("logvar"), py::arg("coupling") = py::none(), py::arg("couple_mean") = true);

  m.def(
      "assemble_covariance",
      [](const Array& sigma, const Array& coupling) {
        return to_array(assemble_covariance(to_matrix(sigma).storage(), to_matrix(coupling)));
      },
      py::arg("sigma"), py::arg("coupling"), "C diag(sigma^2) C^T");

  m.def("coupling_log_abs_det", [](const Array& c) { return coupling_log_abs_det(to_matrix(c)); });

  m.def("nmi", [](const Labels& a, const Labels& b) { return nmi(as_span(a), as_span(b)); });
  m.def("ari", [](const Labels& a, const Labels& b) { return ari(as_span(a), as_span(b)); });
  m.def(
      "expected_calibration_error",
      [](const Array& confidence, const std::vector<bool>& correct, std::size_t bins) {
        const Matrix c = to_matrix(confidence);
        auto flags = std::make_unique<bool[]>(correct.size());
        std::copy(correct.begin(), correct.end(), flags.get());
        return expected_calibration_error(c.storage(), std::span<const bool>(flags.get(), correct.size()),
                                          bins);
      },
      py::arg("confidence"), py::arg("correct"), py::arg("bins") = kDefaultEceBins);
  m.def(
      "classification_metrics",
      [](const Array& probs, const Labels& labels, std::size_t bins) {
        const auto r = classification_metrics(to_matrix(probs), as_span(labels), bins);
        py::dict d;
        d["accuracy"] = r.accuracy;
        d["nll"] = r.nll;
        d["brier"] = r.brier;
        d["ece"] = r.ece;
        return d;
      },
      py::arg("probabilities"), py::arg("labels"), py::arg("bins") = kDefaultEceBins);
  m.def("mse_per_pixel", [](const Array& xhat, const Array& x) {
    return mse_per_pixel(to_matrix(xhat), to_matrix(x));
  });

  m.def(
      "synth_blobs",
      [](std::uint64_t seed, int classes, std::size_t samples, std::size_t dim, double spread) {
        const auto d = synth_blobs(seed, classes, samples, dim, spread);
        return py::make_tuple(to_array(d.features), to_labels(d.labels));
      },
      py::arg("seed"), py::arg("classes"), py::arg("samples"), py::arg("dim"), py::arg("spread") = 0.5,
      "Synthetic labelled data in [0, 1]; returns (features, labels).");

  m.def(
      "train",
      [](const Array& train_x, const Array& val_x, const std::string& model, std::size_t latent,
         std::size_t hidden, std::size_t epochs, std::size_t batch_size, double learning_rate,
         std::uint64_t seed, const std::string& likelihood, bool couple_mean) {
        TrainConfig cfg;
        cfg.model = parse_model_kind(model);
        cfg.latent = latent;
        cfg.hidden = hidden;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        cfg.likelihood = parse_likelihood(likelihood);
        cfg.couple_mean = couple_mean;
        const Matrix tx = to_matrix(train_x), vx = to_matrix(val_x);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cfg, tx, vx);
        }
        py::list epochs_out;
        for (const auto& e : r.epochs) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_nelbo"] = e.train_nelbo;
          d["val_nelbo"] = e.val_nelbo;
          d["recon"] = e.recon;
          d["kl"] = e.kl;
          epochs_out.append(d);
        }
        py::dict out;
        out["best_epoch"] = r.best_epoch;
        out["stopped_early"] = r.stopped_early;
        out["epochs"] = epochs_out;
        out["coupling"] = to_array(r.best_params.coupling);
        out["reconstruction"] = to_array(reconstruct_mean(r.spec, r.best_params, vx));
        out["latent_codes"] = to_array(latent_codes(r.spec, r.best_params, vx));
        return out;
      },
      py::arg("train_x"), py::arg("val_x"), py::arg("model") = "mvae", py::arg("latent") = 2,
      py::arg("hidden") = kDefaultHidden, py::arg("epochs") = 200, py::arg("batch_size") = 100,
      py::arg("learning_rate") = 1e-3, py::arg("seed") = 0, py::arg("likelihood") = "bernoulli",
      py::arg("couple_mean") = true,
      "Train one model in memory. Returns the epoch log, the learned coupling matrix, and\n"
      "reconstructions and latent codes of val_x under the best parameters.");

  m.def(
      "train_config",
      [](const std::filesystem::path& config) {
        const auto o = cmd_train(config);
        py::dict d;
        d["dir"] = o.dir;
        d["best_epoch"] = o.result.best_epoch;
        d["metrics"] = report_dict(o.report);
        return d;
      },
      py::arg("config"), "Run the train command on an INI config; returns the run directory and metrics.");

  m.def(
      "sweep",
      [](const std::filesystem::path& config, const std::vector<std::size_t>& latents) {
        return cmd_sweep(config, latents);
      },
      py::arg("config"), py::arg("latents"), "Run the latent-size sweep; returns the summary CSV path.");

  m.def(
      "evaluate",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& data, std::uint64_t seed) {
        EvalConfig cfg;
        cfg.seed = seed;
        return report_dict(cmd_eval(ckpt, data, cfg, std::nullopt));
      },
      py::arg("checkpoint"), py::arg("data"), py::arg("seed") = 0);

  m.def(
      "render_sweep",
      [](const std::filesystem::path& ckpt, std::size_t dim_a, std::size_t dim_b, std::size_t grid,
         double range) { return image_array(render_sweep(load_checkpoint(ckpt), dim_a, dim_b, grid, range)); },
      py::arg("checkpoint"), py::arg("dim_a") = 0, py::arg("dim_b") = 1, py::arg("grid") = 10,
      py::arg("range") = 2.0, "Latent traversal image with values in [0, 1].");

  m.def(
      "render_recon",
      [](const std::filesystem::path& ckpt, const Array& samples, std::uint64_t seed) {
        return image_array(render_recon(load_checkpoint(ckpt), to_matrix(samples), seed));
      },
      py::arg("checkpoint"), py::arg("samples"), py::arg("seed") = 0);

  m.def("sweep_mesh", &sweep_mesh, py::arg("grid"), py::arg("range") = 2.0);
}
