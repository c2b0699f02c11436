#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "sessrank/cli.hpp"
#include "sessrank/mining.hpp"
#include "sessrank/ranker.hpp"
#include "sessrank/textproc.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
  m.doc() = "session search toolkit core";

  m.def("run", &sessrank::cli::dispatch, py::arg("args"),
        "Run a toolkit subcommand (same arguments as the sessrank binary); "
        "returns the process exit code.");

  m.def(
      "tokenize",
      [](const std::string& text) { return sessrank::textproc::tokenize(text); },
      py::arg("text"), "Lowercase whitespace tokenizer used throughout the toolkit.");

  m.def(
      "reserved_tokens",
      []() {
        const auto& tokens = sessrank::textproc::reserved_tokens();
        return std::vector<std::string>(tokens.begin(), tokens.end());
      },
      "Reserved control tokens in id order.");

  m.def("ambiguous_margin", &sessrank::mining::ambiguous_margin, py::arg("window_pos"),
        py::arg("w_size"), py::arg("mean_margin") = 0.2,
        "Position-scaled margin for an ambiguous-query match.");

  m.def("hinge_loss", &sessrank::ranker::hinge_loss, py::arg("pos_score"),
        py::arg("neg_score"), py::arg("margin"),
        "Pairwise hinge: max(0, margin - pos_score + neg_score).");
}
