// SPDX-License-Identifier: Apache-2.0
/**
 * @file bindings.cpp
 * @brief Python bindings for scenario configuration and execution.
 */
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "jplink/config.hpp"
#include "jplink/scenario.hpp"

namespace py = pybind11;

namespace {

jplink::ScenarioConfig config_from_string(const std::string& text) {
  std::istringstream in(text);
  return jplink::parse_config(in);
}

py::dict run_scenario_py(const jplink::ScenarioConfig& config) {
  const jplink::RunResult result = jplink::run_scenario(config);
  const py::ssize_t n = static_cast<py::ssize_t>(result.rows.size());
  const py::ssize_t cells =
      n > 0 ? static_cast<py::ssize_t>(result.rows[0].per_bs_power.size()) : 0;

  py::array_t<int> frame(n), inner(n), active(n);
  py::array_t<double> sum_rate(n), effective(n), residual(n), grad(n);
  py::array_t<long long> scalars(n), saturations(n);
  py::array_t<double> power({n, cells});
  {
    auto frame_w = frame.mutable_unchecked<1>();
    auto inner_w = inner.mutable_unchecked<1>();
    auto active_w = active.mutable_unchecked<1>();
    auto rate_w = sum_rate.mutable_unchecked<1>();
    auto eff_w = effective.mutable_unchecked<1>();
    auto res_w = residual.mutable_unchecked<1>();
    auto grad_w = grad.mutable_unchecked<1>();
    auto scal_w = scalars.mutable_unchecked<1>();
    auto sat_w = saturations.mutable_unchecked<1>();
    auto pow_w = power.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < n; ++i) {
      const jplink::MetricsRow& row = result.rows[static_cast<size_t>(i)];
      frame_w(i) = row.frame;
      inner_w(i) = row.inner_iteration;
      active_w(i) = row.active_streams;
      rate_w(i) = row.sum_rate;
      eff_w(i) = row.effective_rate;
      res_w(i) = row.consensus_residual;
      grad_w(i) = row.gradient_norm;
      scal_w(i) = row.backhaul_scalars;
      sat_w(i) = row.quantizer_saturation_events;
      for (py::ssize_t b = 0; b < cells; ++b)
        pow_w(i, b) = row.per_bs_power[static_cast<size_t>(b)];
    }
  }

  std::ostringstream csv;
  jplink::write_csv(result.rows, csv);

  py::dict out;
  out["frame"] = std::move(frame);
  out["inner_iteration"] = std::move(inner);
  out["algorithm"] = config.algorithm;
  out["seed"] = config.seed;
  out["sum_rate"] = std::move(sum_rate);
  out["effective_rate"] = std::move(effective);
  out["per_bs_power"] = std::move(power);
  out["consensus_residual"] = std::move(residual);
  out["gradient_norm"] = std::move(grad);
  out["active_streams"] = std::move(active);
  out["backhaul_scalars"] = std::move(scalars);
  out["quantizer_saturation_events"] = std::move(saturations);
  out["summary"] = result.summary;
  out["failed"] = result.failed;
  out["error"] = result.error;
  out["csv"] = csv.str();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint-transmission beamforming simulator";

  py::class_<jplink::ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("cells", &jplink::ScenarioConfig::cells)
      .def_readwrite("users_per_cell", &jplink::ScenarioConfig::users_per_cell)
      .def_readwrite("nt", &jplink::ScenarioConfig::nt)
      .def_readwrite("nr", &jplink::ScenarioConfig::nr)
      .def_readwrite("streams_per_user",
                     &jplink::ScenarioConfig::streams_per_user)
      .def_readwrite("cluster_mode", &jplink::ScenarioConfig::cluster_mode)
      .def_readwrite("snr_db", &jplink::ScenarioConfig::snr_db)
      .def_readwrite("algorithm", &jplink::ScenarioConfig::algorithm)
      .def_readwrite("alpha", &jplink::ScenarioConfig::alpha)
      .def_readwrite("rho", &jplink::ScenarioConfig::rho)
      .def_readwrite("beta_dual", &jplink::ScenarioConfig::beta_dual)
      .def_readwrite("omega", &jplink::ScenarioConfig::omega)
      .def_readwrite("normalize_step", &jplink::ScenarioConfig::normalize_step)
      .def_readwrite("q_bits", &jplink::ScenarioConfig::q_bits)
      .def_readwrite("smoothing_beta", &jplink::ScenarioConfig::smoothing_beta)
      .def_readwrite("gamma", &jplink::ScenarioConfig::gamma)
      .def_readwrite("bit", &jplink::ScenarioConfig::bit)
      .def_readwrite("pilot_length", &jplink::ScenarioConfig::pilot_length)
      .def_readwrite("pilot_orthogonal",
                     &jplink::ScenarioConfig::pilot_orthogonal)
      .def_readwrite("pilot_noise_power",
                     &jplink::ScenarioConfig::pilot_noise_power)
      .def_readwrite("frames", &jplink::ScenarioConfig::frames)
      .def_readwrite("iters_per_frame",
                     &jplink::ScenarioConfig::iters_per_frame)
      .def_readwrite("reset_interval", &jplink::ScenarioConfig::reset_interval)
      .def_readwrite("bit_after_reset",
                     &jplink::ScenarioConfig::bit_after_reset)
      .def_readwrite("delayed_indexing",
                     &jplink::ScenarioConfig::delayed_indexing)
      .def_readwrite("velocity_kmh", &jplink::ScenarioConfig::velocity_kmh)
      .def_readwrite("signaling_rate_ms",
                     &jplink::ScenarioConfig::signaling_rate_ms)
      .def_readwrite("carrier_ghz", &jplink::ScenarioConfig::carrier_ghz)
      .def_readwrite("seed", &jplink::ScenarioConfig::seed)
      .def_readwrite("exchange", &jplink::ScenarioConfig::exchange)
      .def_readwrite("sg_power_mode", &jplink::ScenarioConfig::sg_power_mode)
      .def_readwrite("p_max", &jplink::ScenarioConfig::p_max)
      .def("validate", &jplink::ScenarioConfig::validate)
      .def("__repr__", [](const jplink::ScenarioConfig& config) {
        return "<ScenarioConfig algorithm=" + config.algorithm +
               " cells=" + std::to_string(config.cells) + ">";
      });

  m.def("load_config", &jplink::load_config, py::arg("path"),
        "Load a flat key=value scenario config file");
  m.def("config_from_string", &config_from_string, py::arg("text"),
        "Parse a scenario config from key=value text");
  m.def("format_config", &jplink::format_config, py::arg("config"),
        "Serialize a config back to key=value text");
  m.def("run_scenario", &run_scenario_py, py::arg("config"),
        "Run one scenario; returns a dict of metric columns plus the CSV "
        "text and a one-line summary");
  m.def("derive_doppler", &jplink::derive_doppler, py::arg("velocity_kmh"),
        py::arg("carrier_ghz"), py::arg("signaling_rate_ms"),
        "Normalized Doppler (Doppler shift times frame duration)");
  m.def("csv_header", &jplink::csv_header, "Metric CSV column header");
}
