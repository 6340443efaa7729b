// Python bindings for the core operations: text pipeline, NPMI graph,
// VGCN forward paths, scaled dot-product attention and the evaluation
// metrics. Heavy lifting (training, CLI) stays on the C++ side.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vgcnfuse/encoder.hpp"
#include "vgcnfuse/explain.hpp"
#include "vgcnfuse/graph.hpp"
#include "vgcnfuse/metrics.hpp"
#include "vgcnfuse/vgcn.hpp"

namespace py = pybind11;
using namespace vgcnfuse;

namespace {

TensorD tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = a.shape(i);
  std::vector<double> data(a.data(), a.data() + a.size());
  return TensorD::from(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const TensorD& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

std::vector<RawDocument> docs_from_texts(const std::vector<std::string>& texts) {
  std::vector<RawDocument> docs;
  docs.reserve(texts.size());
  for (const auto& t : texts) docs.push_back({t, {}, {}});
  return docs;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "NPMI vocabulary graphs and graph-token fusion primitives";

  py::register_exception<Error>(m, "VgcnFuseError");

  m.def("clean", &clean, py::arg("text"));
  m.def("tokenize", &tokenize, py::arg("text"));

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static(
          "build",
          [](const std::vector<std::string>& texts, int min_freq) {
            return build_vocab(docs_from_texts(texts), min_freq);
          },
          py::arg("texts"), py::arg("min_freq") = 2)
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("id_of", &Vocabulary::id_of, py::arg("token"))
      .def("__len__", &Vocabulary::size)
      .def_readonly("tokens", &Vocabulary::tokens)
      .def_readonly("freqs", &Vocabulary::freqs)
      .def_readonly("min_freq", &Vocabulary::min_freq);

  py::class_<EncodedDocument>(m, "EncodedDocument")
      .def_readonly("token_ids", &EncodedDocument::token_ids)
      .def_readonly("attention_mask", &EncodedDocument::attention_mask)
      .def_readonly("vocab_tf", &EncodedDocument::vocab_tf);

  m.def(
      "encode",
      [](const std::string& text, const Vocabulary& vocab, int max_len) {
        return encode({text, {}, {}}, vocab, max_len);
      },
      py::arg("text"), py::arg("vocab"), py::arg("max_len") = 200);

  py::class_<CooccurrenceCounts>(m, "CooccurrenceCounts")
      .def_readonly("n_windows", &CooccurrenceCounts::n_windows)
      .def_readonly("word_windows", &CooccurrenceCounts::word_windows)
      .def("pair_count", &CooccurrenceCounts::pair_count, py::arg("i"), py::arg("j"));

  m.def(
      "count_windows",
      [](const std::vector<EncodedDocument>& docs, long vocab_size) {
        return count_windows(docs, vocab_size);
      },
      py::arg("docs"), py::arg("vocab_size"));

  m.def(
      "npmi",
      [](const CooccurrenceCounts& counts, long i, long j) -> py::object {
        auto v = npmi(counts, i, j);
        return v ? py::cast(*v) : py::none();
      },
      py::arg("counts"), py::arg("i"), py::arg("j"));

  py::class_<VocabGraph>(m, "VocabGraph")
      .def_static("load", &VocabGraph::load, py::arg("path"))
      .def("save", &VocabGraph::save, py::arg("path"))
      .def_readonly("size", &VocabGraph::size)
      .def_readonly("threshold", &VocabGraph::threshold)
      .def_readonly("edge_count", &VocabGraph::edge_count)
      .def("density", &VocabGraph::density)
      .def("adjacency_dense",
           [](const VocabGraph& g) {
             py::array_t<double> out({g.size, g.size});
             auto dense = g.adjacency->to_dense();
             for (long i = 0; i < g.size; ++i)
               for (long j = 0; j < g.size; ++j) out.mutable_at(i, j) = dense[i][j];
             return out;
           })
      .def("normalized_dense", [](const VocabGraph& g) {
        py::array_t<double> out({g.size, g.size});
        auto dense = g.normalized->to_dense();
        for (long i = 0; i < g.size; ++i)
          for (long j = 0; j < g.size; ++j) out.mutable_at(i, j) = dense[i][j];
        return out;
      });

  m.def("build_graph", &build_graph, py::arg("counts"), py::arg("threshold") = 0.2);

  m.def(
      "subgraph_slice",
      [](const VocabGraph& g, const std::vector<std::pair<int, int>>& tf) {
        return subgraph_slice(g, tf);
      },
      py::arg("graph"), py::arg("vocab_tf"));

  m.def(
      "vgcn_embed",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& slab,
         const VocabGraph& graph,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w_vh,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w_out) {
        VgcnParams<double> params;
        params.W_vh = tensor_from_array(w_vh);
        params.W_out = tensor_from_array(w_out);
        return array_from_tensor(vgcn_embed(tensor_from_array(slab), graph, params));
      },
      py::arg("slab"), py::arg("graph"), py::arg("w_vh"), py::arg("w_out"),
      "ReLU(X A~ W_vh) W_out over the embedding slab, returned [m, g, e]");

  m.def(
      "vgcn_classify",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& tf,
         const VocabGraph& graph,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w_vh,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w_out) {
        VgcnParams<double> params;
        params.W_vh = tensor_from_array(w_vh);
        params.W_out = tensor_from_array(w_out);
        return array_from_tensor(vgcn_classify(tensor_from_array(tf), graph, params));
      },
      py::arg("tf"), py::arg("graph"), py::arg("w_vh"), py::arg("w_out"));

  m.def(
      "attention",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& q,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& k,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& v,
         py::object mask) {
        TensorD mask_t;
        if (!mask.is_none())
          mask_t = tensor_from_array(
              mask.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>());
        auto res = attention(tensor_from_array(q), tensor_from_array(k), tensor_from_array(v),
                             mask_t);
        return py::make_tuple(array_from_tensor(res.output), array_from_tensor(res.weights));
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("mask") = py::none(),
      "scaled dot-product attention; returns (output, weights)");

  m.def("class_weights", &class_weights, py::arg("label_counts"));

  m.def(
      "f1_report",
      [](const std::vector<int>& predictions, const std::vector<int>& gold, int classes) {
        EvalReport r = f1_report(predictions, gold, classes);
        py::dict d;
        d["weighted_f1"] = r.weighted_f1;
        d["macro_f1"] = r.macro_f1;
        d["precision"] = r.precision;
        d["recall"] = r.recall;
        d["f1"] = r.f1;
        d["confusion"] = r.confusion;
        return d;
      },
      py::arg("predictions"), py::arg("gold"), py::arg("classes"));

  m.def(
      "dimension_words",
      [](const std::vector<std::pair<int, int>>& tf, const VocabGraph& graph,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& slab, long k,
         const Vocabulary& vocab) {
        std::vector<std::vector<double>> w(slab.shape(0), std::vector<double>(slab.shape(1)));
        for (py::ssize_t i = 0; i < slab.shape(0); ++i)
          for (py::ssize_t j = 0; j < slab.shape(1); ++j) w[i][j] = slab.at(i, j);
        auto dims = dimension_words(tf, graph, w, k, vocab);
        py::list out;
        for (const auto& dim : dims) {
          py::list row;
          for (const auto& dw : dim) row.append(py::make_tuple(dw.id, dw.word, dw.score));
          out.append(row);
        }
        return out;
      },
      py::arg("vocab_tf"), py::arg("graph"), py::arg("weight_slab"), py::arg("k"),
      py::arg("vocab"));
}
