#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "localembed/eval.hpp"
#include "localembed/io.hpp"
#include "localembed/pipeline.hpp"
#include "localembed/svp.hpp"
#include "localembed/tuning.hpp"

namespace py = pybind11;
using namespace localembed;

namespace {

SparseMatrix csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> indptr, std::vector<Index> indices,
                 std::vector<double> values) {
  SparseMatrix m(rows, cols, std::move(indptr), std::move(indices), std::move(values));
  m.validate();
  return m;
}

py::tuple csr_parts(const SparseMatrix& m) { return py::make_tuple(m.row_offsets(), m.col_indices(), m.values()); }

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  for (const auto& [k, p] : r.precision) d[py::int_(k)] = p;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Local label-embedding extreme multi-label classifier";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ModelFormatError>(m, "ModelFormatError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_static(
          "from_csr",
          [](std::size_t n, std::size_t d, std::size_t num_labels, std::vector<std::size_t> x_indptr,
             std::vector<Index> x_indices, std::vector<double> x_values, std::vector<std::size_t> y_indptr,
             std::vector<Index> y_indices) {
            std::vector<double> ones(y_indices.size(), 1.0);
            return Dataset{csr(n, d, std::move(x_indptr), std::move(x_indices), std::move(x_values)),
                           csr(n, num_labels, std::move(y_indptr), std::move(y_indices), std::move(ones))};
          },
          py::arg("n"), py::arg("d"), py::arg("num_labels"), py::arg("x_indptr"), py::arg("x_indices"),
          py::arg("x_values"), py::arg("y_indptr"), py::arg("y_indices"),
          "Build from CSR arrays of the point-major feature and label matrices.")
      .def_property_readonly("num_points", &Dataset::num_points)
      .def_property_readonly("feature_dim", &Dataset::feature_dim)
      .def_property_readonly("label_count", &Dataset::label_count)
      .def("features_csr", [](const Dataset& d) { return csr_parts(d.features); })
      .def("labels_csr", [](const Dataset& d) { return csr_parts(d.labels); })
      .def("label_rows", [](const Dataset& d) {
        std::vector<std::vector<Index>> rows(d.num_points());
        for (std::size_t i = 0; i < d.num_points(); ++i) {
          const auto r = d.labels.row(i);
          rows[i].assign(r.indices.begin(), r.indices.end());
        }
        return rows;
      })
      .def("subset", [](const Dataset& d, const std::vector<Index>& rows) {
        for (Index r : rows)
          if (r < 0 || static_cast<std::size_t>(r) >= d.num_points()) throw py::index_error("row out of range");
        return d.subset(rows);
      })
      .def("write", [](const Dataset& d, const std::filesystem::path& p) { write_xmc(d, p); })
      .def("__repr__", [](const Dataset& d) {
        std::ostringstream s;
        s << "Dataset(n=" << d.num_points() << ", d=" << d.feature_dim() << ", L=" << d.label_count() << ")";
        return s.str();
      });

  m.def(
      "read_dataset",
      [](const std::filesystem::path& p, bool one_indexed) { return parse_xmc(p, ParseOptions{one_indexed}); },
      py::arg("path"), py::arg("one_indexed") = false);
  m.def(
      "parse_dataset",
      [](const std::string& text, bool one_indexed) {
        std::istringstream in(text);
        return parse_xmc(in, ParseOptions{one_indexed}, "<string>");
      },
      py::arg("text"), py::arg("one_indexed") = false);

  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init<>())
      .def_readwrite("l_hat", &HyperParams::l_hat)
      .def_readwrite("n_bar", &HyperParams::n_bar)
      .def_readwrite("clusters", &HyperParams::clusters)
      .def_readwrite("k_nn", &HyperParams::k_nn)
      .def_readwrite("num_learners", &HyperParams::num_learners)
      .def_readwrite("sparsify_threshold", &HyperParams::sparsify_threshold)
      .def_readwrite("threads", &HyperParams::threads)
      .def_property(
          "lambda_", [](const HyperParams& h) { return h.admm.lambda; },
          [](HyperParams& h, double v) { h.admm.lambda = v; })
      .def_property(
          "mu", [](const HyperParams& h) { return h.admm.mu; }, [](HyperParams& h, double v) { h.admm.mu = v; })
      .def_property(
          "rho", [](const HyperParams& h) { return h.admm.rho; }, [](HyperParams& h, double v) { h.admm.rho = v; })
      .def_property(
          "admm_iters", [](const HyperParams& h) { return h.admm.max_iters; },
          [](HyperParams& h, std::size_t v) { h.admm.max_iters = v; })
      .def_property(
          "svp_iters", [](const HyperParams& h) { return h.svp.max_iters; },
          [](HyperParams& h, std::size_t v) { h.svp.max_iters = v; })
      .def_property(
          "metric",
          [](const HyperParams& h) { return h.metric == Metric::euclidean ? "euclidean" : "inner-product"; },
          [](HyperParams& h, const std::string& v) {
            if (v == "euclidean") h.metric = Metric::euclidean;
            else if (v == "inner-product") h.metric = Metric::inner_product;
            else throw py::value_error("metric must be 'euclidean' or 'inner-product'");
          })
      .def("validate", [](const HyperParams& h) {
        HyperParams c = h;
        c.svp.l_hat = c.l_hat;
        c.validate();
      });

  py::class_<Ensemble>(m, "Model")
      .def_property_readonly("feature_dim", [](const Ensemble& e) { return e.feature_dim; })
      .def_property_readonly("label_count", [](const Ensemble& e) { return e.label_count; })
      .def_property_readonly("num_learners", [](const Ensemble& e) { return e.learners.size(); })
      .def_property_readonly("hyper", [](const Ensemble& e) { return e.hyper; })
      .def(
          "predict",
          [](const Ensemble& e, const Dataset& d, std::size_t top) {
            std::vector<std::vector<std::pair<Index, double>>> out(d.num_points());
            py::gil_scoped_release release;
            for (std::size_t i = 0; i < d.num_points(); ++i) {
              const Prediction p = predict(e, d.features.row(i), top);
              for (std::size_t j = 0; j < p.labels.size(); ++j) out[i].emplace_back(p.labels[j], p.scores[j]);
            }
            return out;
          },
          py::arg("data"), py::arg("top") = 5, "Top labels and scores for every point, best first.")
      .def(
          "evaluate",
          [](const Ensemble& e, const Dataset& d, std::vector<std::size_t> ks) {
            EvalReport r;
            {
              py::gil_scoped_release release;
              r = evaluate(e, d.features, d.labels, ks);
            }
            return report_dict(r);
          },
          py::arg("data"), py::arg("ks") = std::vector<std::size_t>{1, 3, 5}, "Mean precision@k keyed by k.")
      .def("save", [](const Ensemble& e, const std::filesystem::path& p) { save_model(e, p); })
      .def("to_bytes",
           [](const Ensemble& e) {
             std::ostringstream s;
             save_model(e, s);
             return py::bytes(s.str());
           })
      .def_property_readonly("size_bytes", [](const Ensemble& e) { return model_size_bytes(e); })
      .def_property_readonly("dense_size_bytes", [](const Ensemble& e) { return dense_model_size_bytes(e); });

  m.def(
      "train",
      [](const Dataset& d, HyperParams h, std::uint64_t seed) {
        h.svp.l_hat = h.l_hat;
        py::gil_scoped_release release;
        return train_ensemble(d.features, d.labels, h, seed);
      },
      py::arg("data"), py::arg("hyper") = HyperParams{}, py::arg("seed") = 42);
  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"));
  m.def(
      "model_from_bytes",
      [](const py::bytes& b) {
        std::istringstream s{std::string(b)};
        return load_model(s);
      },
      py::arg("data"));

  m.def(
      "grid_search",
      [](const Dataset& d, HyperParams base, std::vector<double> lambdas, std::vector<double> mus,
         std::vector<std::size_t> k_nns, std::vector<std::size_t> n_bars, std::uint64_t seed, double valid_fraction) {
        base.svp.l_hat = base.l_hat;
        GridResult g;
        {
          py::gil_scoped_release release;
          g = grid_search(d, GridSpec{lambdas, mus, k_nns, n_bars}, base, seed, valid_fraction);
        }
        py::list table;
        for (const auto& r : g.table) {
          py::dict row;
          row["lambda"] = r.lambda;
          row["mu"] = r.mu;
          row["k_nn"] = r.k_nn;
          row["n_bar"] = r.n_bar;
          row["p_at_1"] = r.p_at_1;
          row["p_at_3"] = r.p_at_3;
          row["p_at_5"] = r.p_at_5;
          table.append(row);
        }
        return py::make_tuple(g.best, table);
      },
      py::arg("data"), py::arg("base") = HyperParams{}, py::arg("lambdas") = GridSpec{}.lambda,
      py::arg("mus") = GridSpec{}.mu, py::arg("k_nns") = GridSpec{}.k_nn, py::arg("n_bars") = GridSpec{}.n_bar,
      py::arg("seed") = 42, py::arg("valid_fraction") = 0.2,
      "Returns (best HyperParams, list of per-grid-point validation precision).");

  m.def(
      "approximation_error",
      [](const Dataset& d, std::size_t l_hat, const std::string& mode, std::size_t n_bar) {
        if (mode == "global_svd") return approximation_error(d.labels, l_hat, ApproxMode::global_svd);
        if (mode != "nn_objective") throw py::value_error("mode must be 'global_svd' or 'nn_objective'");
        const OmegaSet omega = build_omega(d.labels, n_bar);
        return approximation_error(d.labels, l_hat, ApproxMode::nn_objective, &omega);
      },
      py::arg("data"), py::arg("l_hat"), py::arg("mode") = "global_svd", py::arg("n_bar") = 10);

  m.def(
      "svp_complete_dense",
      [](const DenseMatrix& gram, std::size_t l_hat, std::size_t max_iters) {
        if (gram.rows() != gram.cols()) throw py::value_error("gram must be square");
        SvpConfig cfg;
        cfg.l_hat = l_hat;
        cfg.max_iters = max_iters;
        const SvpResult r = svp_complete(OmegaSet::full(gram), cfg);
        return py::make_tuple(embeddings_from_factor(r.factor, l_hat), r.objective);
      },
      py::arg("gram"), py::arg("l_hat"), py::arg("max_iters") = 1,
      "SVP on a fully observed Gram matrix; returns (Z, objective trace) with Z of shape l_hat x n.");

  m.def("label_frequencies", [](const Dataset& d) { return label_frequencies(d.labels); });
}
