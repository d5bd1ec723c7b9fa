#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "localembed/io.hpp"
#include "properties.hpp"

using namespace localembed;
using namespace localembed::testing;

namespace {

std::string bytes_of(const Ensemble& e) {
  std::ostringstream out;
  save_model(e, out);
  return out.str();
}

Ensemble load_bytes(const std::string& s) {
  std::istringstream in(s);
  return load_model(in);
}

}  // namespace

TEST_CASE("save and load preserve predictions") { CHECK(check_model_round_trip() == ""); }

TEST_CASE("loaded fields match") {
  const Ensemble e = small_model(101);
  const Ensemble b = load_bytes(bytes_of(e));
  CHECK(b.feature_dim == e.feature_dim);
  CHECK(b.label_count == e.label_count);
  CHECK(b.train_labels == e.train_labels);
  CHECK(b.hyper.l_hat == e.hyper.l_hat);
  CHECK(b.hyper.k_nn == e.hyper.k_nn);
  CHECK(b.hyper.admm.lambda == e.hyper.admm.lambda);
  CHECK(b.hyper.metric == e.hyper.metric);
  REQUIRE(b.learners.size() == e.learners.size());
  for (std::size_t t = 0; t < e.learners.size(); ++t) {
    CHECK(b.learners[t].centroids == e.learners[t].centroids);
    REQUIRE(b.learners[t].clusters.size() == e.learners[t].clusters.size());
    for (std::size_t c = 0; c < e.learners[t].clusters.size(); ++c) {
      CHECK(b.learners[t].clusters[c].members == e.learners[t].clusters[c].members);
      CHECK(b.learners[t].clusters[c].regressor == e.learners[t].clusters[c].regressor);
      CHECK(b.learners[t].clusters[c].embeddings == e.learners[t].clusters[c].embeddings);
    }
  }
  CHECK(model_size_bytes(e) == bytes_of(e).size());
}

TEST_CASE("file round trip") {
  const Ensemble e = small_model(102, 1);
  const auto path = std::filesystem::temp_directory_path() / "localembed_model_rt.bin";
  save_model(e, path);
  CHECK(std::filesystem::file_size(path) == model_size_bytes(e));
  CHECK(bytes_of(load_model(path)) == bytes_of(e));
  std::filesystem::remove(path);
  CHECK_THROWS(load_model(path));
}

TEST_CASE("damaged files are rejected") {
  const std::string good = bytes_of(small_model(103, 1));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, good.size() / 2, good.size() - 1}) {
    CAPTURE(cut);
    CHECK_THROWS_AS(load_bytes(good.substr(0, cut)), ModelFormatError);
  }
  try {
    load_bytes(good.substr(0, good.size() / 2));
  } catch (const ModelFormatError& e) {
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
  std::string magic = good;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(load_bytes(magic), "not a model file", ModelFormatError);
  std::string version = good;
  version[4] = static_cast<char>(kModelVersion + 1);
  CHECK_THROWS_AS(load_bytes(version), ModelFormatError);
  // a flipped payload byte is caught by the section checksum
  for (std::size_t pos = 20; pos < good.size(); pos += good.size() / 7) {
    std::string flipped = good;
    flipped[pos] = static_cast<char>(flipped[pos] ^ 0x5a);
    CHECK_THROWS_AS(load_bytes(flipped), ModelFormatError);
  }
  CHECK_THROWS_AS(load_bytes(good + "x"), ModelFormatError);
}

TEST_CASE("sparsified regressors are smaller than dense ones on localized data") {
  TopicSpec s;
  s.n = 400;
  s.d = 300;
  s.labels = 20;
  s.topics = 6;
  s.seed = 104;
  const Dataset d = make_topic_data(s);
  HyperParams h;
  h.l_hat = 10;
  h.n_bar = 5;
  h.clusters = 4;
  h.k_nn = 5;
  h.svp.max_iters = 20;
  h.admm.mu = 0.5;
  h.sparsify_threshold = 1e-3;
  const Ensemble e = train_ensemble(d.features, d.labels, h, 5);
  CHECK(model_size_bytes(e) < dense_model_size_bytes(e));
}
