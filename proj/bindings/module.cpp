// Python bindings for the core operations: geometry and CRLB, activations,
// ISTA, network forwards, training, simulation and detection scoring.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tomornn/config.hpp"
#include "tomornn/evaluation.hpp"
#include "tomornn/geometry.hpp"
#include "tomornn/networks.hpp"
#include "tomornn/simulation.hpp"
#include "tomornn/training.hpp"

namespace py = pybind11;
using namespace tomornn;

namespace {

Checkpoint make_init_checkpoint(const std::string& arch,
                                const AcquisitionGeometry& geom,
                                const ElevationGrid& grid, int depth,
                                std::uint64_t seed, double lambda) {
  const CMatrix r = build_steering_matrix(geom, grid);
  const double beta = default_step_size(r);
  Rng rng = Rng::stream(seed, 0xA);
  InitOptions opts;
  opts.lambda = lambda;
  Checkpoint c;
  c.arch = architecture_from_string(arch);
  c.depth = depth;
  c.n = geom.count();
  c.l = grid.size();
  c.beta = beta;
  c.geometry_fingerprint = geom.fingerprint();
  c.weights = init_weights(c.arch, r, beta, depth, rng, opts);
  return c;
}

CVector checkpoint_forward(const Checkpoint& c, const CVector& g,
                           const AcquisitionGeometry& geom,
                           const ElevationGrid& grid) {
  const CMatrix r = build_steering_matrix(geom, grid);
  return network_forward(c.weights, g, r).first;
}

std::vector<CVector> checkpoint_forward_trace(const Checkpoint& c,
                                              const CVector& g,
                                              const AcquisitionGeometry& geom,
                                              const ElevationGrid& grid) {
  const CMatrix r = build_steering_matrix(geom, grid);
  return network_forward(c.weights, g, r).second.output;
}

Checkpoint train_py(const std::string& arch, int depth, int epochs,
                    const std::string& dataset_path,
                    const AcquisitionGeometry& geom, const ElevationGrid& grid,
                    std::uint64_t seed, double lr_initial, int batch_size,
                    double lambda, int validation_samples,
                    const std::string& lr_policy, double lr_factor,
                    int lr_every_epochs) {
  TrainConfig cfg;
  cfg.arch = architecture_from_string(arch);
  cfg.depth = depth;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr_initial = lr_initial;
  cfg.lr_schedule.policy = lr_policy;
  cfg.lr_schedule.factor = lr_factor;
  cfg.lr_schedule.every_epochs = lr_every_epochs;
  cfg.seed = seed;
  cfg.lambda = lambda;
  cfg.validation_samples = validation_samples;
  const Dataset data = load_dataset(dataset_path);
  py::gil_scoped_release release;
  return train(cfg, data, geom, grid);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Complex-valued unrolled RNNs and ISTA for SAR tomography";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

  py::class_<AcquisitionGeometry>(m, "AcquisitionGeometry")
      .def(py::init<>())
      .def_readwrite("baselines", &AcquisitionGeometry::baselines)
      .def_readwrite("freq_scale", &AcquisitionGeometry::freq_scale)
      .def_property_readonly("n", &AcquisitionGeometry::count)
      .def("frequencies", &AcquisitionGeometry::frequencies)
      .def("fingerprint", &AcquisitionGeometry::fingerprint)
      .def_static("regular", &AcquisitionGeometry::regular, py::arg("n"),
                  py::arg("b_min"), py::arg("b_max"), py::arg("kappa"))
      .def_static("from_span_and_resolution",
                  &AcquisitionGeometry::from_span_and_resolution, py::arg("n"),
                  py::arg("b_min"), py::arg("b_max"), py::arg("rayleigh_res"))
      .def_static("reference", &AcquisitionGeometry::reference);

  py::class_<ElevationGrid>(m, "ElevationGrid")
      .def(py::init([](double s_min, double s_max, double spacing) {
             ElevationGrid g{s_min, s_max, spacing};
             g.validate();
             return g;
           }),
           py::arg("s_min"), py::arg("s_max"), py::arg("spacing") = 1.0)
      .def_readonly("s_min", &ElevationGrid::s_min)
      .def_readonly("s_max", &ElevationGrid::s_max)
      .def_readonly("spacing", &ElevationGrid::spacing)
      .def_property_readonly("l", &ElevationGrid::size)
      .def("position", &ElevationGrid::position)
      .def("nearest_bin", &ElevationGrid::nearest_bin)
      .def_static("reference", &ElevationGrid::reference);

  m.def("build_steering_matrix", &build_steering_matrix);
  m.def("steering_column", &steering_column);
  m.def("rayleigh_resolution", &rayleigh_resolution);
  m.def("crlb_elevation", &crlb_elevation, py::arg("geometry"), py::arg("snr_db"),
        py::arg("s"));
  m.def(
      "perturb_baselines",
      [](const AcquisitionGeometry& g, double lo, double hi, std::uint64_t seed) {
        Rng rng(seed);
        return perturb_baselines(g, lo, hi, rng);
      },
      py::arg("geometry"), py::arg("min_shift"), py::arg("max_shift"),
      py::arg("seed"));

  // activations
  m.def("sigmoid", &sigmoid);
  m.def(
      "soft_threshold_cv",
      [](Complex x, double theta) { return soft_threshold_cv(x, theta); },
      py::arg("x"), py::arg("theta"));
  m.def(
      "double_tanh",
      [](double x, double scale, double threshold) {
        return double_tanh(x, DtParams{scale, threshold});
      },
      py::arg("x"), py::arg("scale"), py::arg("threshold"));
  m.def(
      "double_tanh_cv",
      [](Complex x, double scale, double threshold) {
        return double_tanh_cv(x, DtParams{scale, threshold});
      },
      py::arg("x"), py::arg("scale"), py::arg("threshold"));
  m.def(
      "piecewise_linear_cv",
      [](Complex x, double t1, double t2, double t3, double t4, double t5) {
        return piecewise_linear_cv(x, PwlParams{t1, t2, t3, t4, t5});
      },
      py::arg("x"), py::arg("t1"), py::arg("t2"), py::arg("t3"), py::arg("t4"),
      py::arg("t5"));
  m.def("support_select",
        [](const CVector& x, double rho,
           const std::function<Complex(Complex)>& shrink) {
          return support_select(x, rho, shrink);
        });

  // classic ISTA
  m.def("ista_step", &ista_step, py::arg("gamma"), py::arg("g"), py::arg("r"),
        py::arg("beta"), py::arg("lam"));
  m.def("ista_solve", &ista_solve, py::arg("g"), py::arg("r"), py::arg("beta"),
        py::arg("lam"), py::arg("iterations"));
  m.def("bpdn_objective", &bpdn_objective);
  m.def("largest_eigenvalue_rhr", &largest_eigenvalue_rhr, py::arg("r"),
        py::arg("max_iters") = 100000, py::arg("tol") = 1e-10);
  m.def("default_step_size", &default_step_size);

  // networks via checkpoints
  py::class_<Checkpoint>(m, "Checkpoint")
      .def_property_readonly(
          "architecture", [](const Checkpoint& c) { return to_string(c.arch); })
      .def_readonly("depth", &Checkpoint::depth)
      .def_readonly("n", &Checkpoint::n)
      .def_readonly("l", &Checkpoint::l)
      .def_readonly("beta", &Checkpoint::beta)
      .def_readonly("geometry_fingerprint", &Checkpoint::geometry_fingerprint)
      .def_readonly("train_loss", &Checkpoint::train_loss)
      .def_readonly("val_nmse_db", &Checkpoint::val_nmse_db)
      .def_property_readonly("parameter_count", [](const Checkpoint& c) {
        return parameter_count(c.weights);
      });

  m.def("init_checkpoint", &make_init_checkpoint, py::arg("architecture"),
        py::arg("geometry"), py::arg("grid"), py::arg("depth"),
        py::arg("seed") = 1, py::arg("lam") = 1.0);
  m.def("forward", &checkpoint_forward, py::arg("checkpoint"), py::arg("g"),
        py::arg("geometry"), py::arg("grid"));
  m.def("forward_trace", &checkpoint_forward_trace, py::arg("checkpoint"),
        py::arg("g"), py::arg("geometry"), py::arg("grid"));
  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);
  m.def("train", &train_py, py::arg("architecture"), py::arg("depth"),
        py::arg("epochs"), py::arg("dataset_path"), py::arg("geometry"),
        py::arg("grid"), py::arg("seed") = 1, py::arg("lr_initial") = 1e-4,
        py::arg("batch_size") = 256, py::arg("lam") = 1.0,
        py::arg("validation_samples") = 5000, py::arg("lr_policy") = "step",
        py::arg("lr_factor") = 0.5, py::arg("lr_every_epochs") = 100);

  // simulation
  py::class_<Scatterer>(m, "Scatterer")
      .def(py::init([](double elevation, double amplitude, double phase) {
             return Scatterer{elevation, amplitude, phase};
           }),
           py::arg("elevation"), py::arg("amplitude"), py::arg("phase"))
      .def_readwrite("elevation", &Scatterer::elevation)
      .def_readwrite("amplitude", &Scatterer::amplitude)
      .def_readwrite("phase", &Scatterer::phase)
      .def_property_readonly("reflectivity", &Scatterer::reflectivity);

  py::class_<GroundTruth>(m, "GroundTruth")
      .def_readwrite("scatterers", &GroundTruth::scatterers)
      .def_readwrite("snr_db", &GroundTruth::snr_db)
      .def("support", &GroundTruth::support)
      .def("profile", &GroundTruth::profile);

  m.def(
      "sample_single",
      [](const ElevationGrid& grid, std::uint64_t seed) {
        Rng rng(seed);
        return sample_single(rng, grid, SimulationParams{});
      },
      py::arg("grid"), py::arg("seed"));
  m.def(
      "sample_double",
      [](const ElevationGrid& grid, double rho_s, std::uint64_t seed) {
        Rng rng(seed);
        return sample_double(rng, grid, SimulationParams{}, rho_s);
      },
      py::arg("grid"), py::arg("rho_s"), py::arg("seed"));
  m.def("benchmark_truth", &benchmark_truth, py::arg("alpha"), py::arg("snr_db"),
        py::arg("amp_ratio"), py::arg("delta_phi"), py::arg("grid"),
        py::arg("rho_s"), py::arg("s_ref") = 0.0);
  m.def(
      "synthesize",
      [](const AcquisitionGeometry& geom, const GroundTruth& truth,
         std::uint64_t seed) {
        Rng rng(seed);
        return synthesize(geom, truth, rng);
      },
      py::arg("geometry"), py::arg("truth"), py::arg("seed"));
  m.def(
      "build_dataset",
      [](std::uint64_t count, std::uint64_t seed, const AcquisitionGeometry& geom,
         const ElevationGrid& grid, const std::string& path,
         double single_fraction) {
        DatasetConfig dc;
        dc.count = count;
        dc.master_seed = seed;
        dc.single_fraction = single_fraction;
        build_dataset(dc, geom, grid, path);
      },
      py::arg("count"), py::arg("seed"), py::arg("geometry"), py::arg("grid"),
      py::arg("path"), py::arg("single_fraction") = 0.5);

  // evaluation
  py::class_<DetectionParams>(m, "DetectionParams")
      .def(py::init<>())
      .def_readwrite("max_order", &DetectionParams::max_order)
      .def_readwrite("min_peak_fraction", &DetectionParams::min_peak_fraction)
      .def_readwrite("merge_radius", &DetectionParams::merge_radius)
      .def_readwrite("order_penalty", &DetectionParams::order_penalty);

  py::class_<DetectedScatterer>(m, "DetectedScatterer")
      .def_readonly("elevation", &DetectedScatterer::elevation)
      .def_readonly("amplitude", &DetectedScatterer::amplitude)
      .def_readonly("bin", &DetectedScatterer::bin);

  py::class_<Extraction>(m, "Extraction")
      .def_readonly("scatterers", &Extraction::scatterers)
      .def_readonly("order", &Extraction::order);

  m.def("nmse_db", &nmse_db, py::arg("estimates"), py::arg("truths"));
  m.def(
      "extract_scatterers",
      [](const CVector& gamma_hat, const ElevationGrid& grid,
         const DetectionParams& params, const CVector& g,
         const AcquisitionGeometry& geom) {
        const CMatrix r = build_steering_matrix(geom, grid);
        return extract_scatterers(gamma_hat, grid, params, g, r);
      },
      py::arg("gamma_hat"), py::arg("grid"), py::arg("params"), py::arg("g"),
      py::arg("geometry"));
  m.def("effective_detection", &effective_detection, py::arg("estimate"),
        py::arg("truth"), py::arg("crlb_m"), py::arg("d_s_m"));
  m.def("wilson_interval", &wilson_interval, py::arg("successes"),
        py::arg("trials"), py::arg("z") = 1.959963984540054);
}
