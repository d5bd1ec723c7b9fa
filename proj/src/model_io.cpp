#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "localembed/io.hpp"

namespace localembed {
namespace {

constexpr std::array<char, 4> kMagic{'L', 'E', 'M', 'B'};

constexpr std::uint32_t tag(const char (&s)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

constexpr std::uint32_t kHyper = tag("HYPR");
constexpr std::uint32_t kLabels = tag("LABL");
constexpr std::uint32_t kLearner = tag("LRNR");
constexpr std::uint32_t kEnd = tag("END.");

// Little-endian fixed-width encoder.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void size(std::size_t v) { u64(static_cast<std::uint64_t>(v)); }

  void sparse(const SparseMatrix& m) {
    size(m.rows());
    size(m.cols());
    size(m.nnz());
    for (std::size_t r = 0; r <= m.rows(); ++r) size(m.row_offsets()[r]);
    for (Index c : m.col_indices()) u32(static_cast<std::uint32_t>(c));
    for (double v : m.values()) f64(v);
  }

  void dense(const DenseMatrix& m) {
    size(static_cast<std::size_t>(m.rows()));
    size(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t size() { return static_cast<std::size_t>(u64()); }
  std::size_t remaining() const { return buf_.size() - pos_; }

  SparseMatrix sparse() {
    const std::size_t rows = size(), cols = size(), nnz = size();
    if (rows >= remaining() / 8 || nnz > remaining() / 12) throw ModelFormatError("truncated sparse block");
    std::vector<std::size_t> offsets(rows + 1);
    for (auto& o : offsets) o = size();
    std::vector<Index> idx(nnz);
    for (auto& c : idx) c = static_cast<Index>(u32());
    std::vector<double> vals(nnz);
    for (auto& v : vals) v = f64();
    try {
      return SparseMatrix(rows, cols, std::move(offsets), std::move(idx), std::move(vals));
    } catch (const std::invalid_argument& e) {
      throw ModelFormatError(std::string("corrupt sparse block: ") + e.what());
    }
  }

  DenseMatrix dense() {
    const std::size_t rows = size(), cols = size();
    if (cols != 0 && rows > remaining() / 8 / cols) throw ModelFormatError("truncated dense block");
    DenseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }

  bool done() const { return pos_ == buf_.size(); }

 private:
  const char* take(std::size_t n) {
    if (buf_.size() - pos_ < n) throw ModelFormatError("model section ended early");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const std::string& payload) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

void write_section(std::ostream& out, std::uint32_t section_tag, const std::string& payload) {
  Writer head;
  head.u32(section_tag);
  head.u64(payload.size());
  out.write(head.bytes().data(), static_cast<std::streamsize>(head.bytes().size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  Writer tail;
  tail.u32(checksum(payload));
  out.write(tail.bytes().data(), 4);
}

std::string encode_hyper(const HyperParams& h, std::size_t feature_dim, std::size_t label_count,
                         std::size_t learner_count) {
  Writer w;
  w.size(feature_dim);
  w.size(label_count);
  w.size(learner_count);
  w.size(h.l_hat);
  w.size(h.n_bar);
  w.size(h.clusters);
  w.size(h.k_nn);
  w.size(h.num_learners);
  w.f64(h.svp.eta);
  w.size(h.svp.max_iters);
  w.f64(h.svp.rel_tol);
  w.u8(h.svp.step_backoff ? 1 : 0);
  w.f64(h.svp.eig_tol);
  w.u32(static_cast<std::uint32_t>(h.svp.eig_max_iter));
  w.f64(h.admm.lambda);
  w.f64(h.admm.mu);
  w.f64(h.admm.rho);
  w.size(h.admm.max_iters);
  w.f64(h.admm.rel_tol);
  w.size(h.admm.direct_solve_max_dim);
  w.f64(h.admm.cg_tol);
  w.size(h.admm.cg_max_iters);
  w.size(h.kmeans.max_iters);
  w.u8(h.kmeans.plus_plus ? 1 : 0);
  w.u8(h.kmeans.normalize ? 1 : 0);
  w.u8(h.metric == Metric::euclidean ? 0 : 1);
  w.f64(h.sparsify_threshold);
  return w.bytes();
}

std::string encode_learner(const Learner& learner, bool force_dense) {
  Writer w;
  w.dense(learner.centroids);
  w.size(learner.clusters.size());
  for (const auto& c : learner.clusters) {
    w.size(c.members.size());
    for (Index m : c.members) w.u32(static_cast<std::uint32_t>(m));
    // Regressors go out in whichever layout is smaller.
    const std::size_t dense_bytes = c.regressor.rows() * c.regressor.cols() * 8;
    const std::size_t sparse_bytes = (c.regressor.rows() + 1) * 8 + c.regressor.nnz() * 12;
    if (force_dense || dense_bytes < sparse_bytes) {
      w.u8(1);
      w.dense(c.regressor.to_dense());
    } else {
      w.u8(0);
      w.sparse(c.regressor);
    }
    w.dense(c.embeddings);
  }
  return w.bytes();
}

void write_model(const Ensemble& e, std::ostream& out, bool force_dense) {
  out.write(kMagic.data(), 4);
  Writer v;
  v.u32(kModelVersion);
  out.write(v.bytes().data(), 4);
  write_section(out, kHyper, encode_hyper(e.hyper, e.feature_dim, e.label_count, e.learners.size()));
  Writer labels;
  labels.sparse(e.train_labels);
  write_section(out, kLabels, labels.bytes());
  for (const auto& learner : e.learners) write_section(out, kLearner, encode_learner(learner, force_dense));
  write_section(out, kEnd, std::string());
}

struct Section {
  std::uint32_t tag = 0;
  std::string payload;
};

Section read_section(std::istream& in) {
  char head[12];
  if (!in.read(head, 12)) throw ModelFormatError("model file truncated: missing section header (checksum failure)");
  const std::string head_bytes(head, 12);
  Reader r(head_bytes);
  Section s;
  s.tag = r.u32();
  const std::uint64_t len = r.u64();
  if (len > (std::uint64_t{1} << 40)) throw ModelFormatError("implausible section length");
  s.payload.resize(static_cast<std::size_t>(len));
  if (len > 0 && !in.read(s.payload.data(), static_cast<std::streamsize>(len)))
    throw ModelFormatError("model file truncated inside a section (checksum failure)");
  char crc_bytes[4];
  if (!in.read(crc_bytes, 4)) throw ModelFormatError("model file truncated: missing checksum");
  const std::uint32_t stored = Reader{std::string(crc_bytes, 4)}.u32();
  if (stored != checksum(s.payload)) throw ModelFormatError("section checksum failure");
  return s;
}

}  // namespace

void save_model(const Ensemble& ensemble, std::ostream& out) {
  write_model(ensemble, out, false);
  if (!out) throw std::runtime_error("failed writing model");
}

void save_model(const Ensemble& ensemble, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_model(ensemble, out);
}

Ensemble load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic.data(), 4) != 0) throw ModelFormatError("not a model file");
  char vb[4];
  if (!in.read(vb, 4)) throw ModelFormatError("model file truncated");
  const std::uint32_t version = Reader{std::string(vb, 4)}.u32();
  if (version != kModelVersion) {
    throw ModelFormatError("model version " + std::to_string(version) + " unsupported (expected " +
                           std::to_string(kModelVersion) + ")");
  }

  Ensemble e;
  std::size_t expected_learners = 0;
  Section s = read_section(in);
  if (s.tag != kHyper) throw ModelFormatError("expected hyper-parameter section");
  {
    Reader r(s.payload);
    HyperParams& h = e.hyper;
    e.feature_dim = r.size();
    e.label_count = r.size();
    expected_learners = r.size();
    h.l_hat = r.size();
    h.n_bar = r.size();
    h.clusters = r.size();
    h.k_nn = r.size();
    h.num_learners = r.size();
    h.svp.eta = r.f64();
    h.svp.max_iters = r.size();
    h.svp.rel_tol = r.f64();
    h.svp.step_backoff = r.u8() != 0;
    h.svp.eig_tol = r.f64();
    h.svp.eig_max_iter = static_cast<int>(r.u32());
    h.svp.l_hat = h.l_hat;
    h.admm.lambda = r.f64();
    h.admm.mu = r.f64();
    h.admm.rho = r.f64();
    h.admm.max_iters = r.size();
    h.admm.rel_tol = r.f64();
    h.admm.direct_solve_max_dim = r.size();
    h.admm.cg_tol = r.f64();
    h.admm.cg_max_iters = r.size();
    h.kmeans.max_iters = r.size();
    h.kmeans.plus_plus = r.u8() != 0;
    h.kmeans.normalize = r.u8() != 0;
    h.metric = r.u8() == 0 ? Metric::euclidean : Metric::inner_product;
    h.sparsify_threshold = r.f64();
    if (!r.done()) throw ModelFormatError("trailing bytes in hyper-parameter section");
  }

  s = read_section(in);
  if (s.tag != kLabels) throw ModelFormatError("expected label section");
  {
    Reader r(s.payload);
    e.train_labels = r.sparse();
  }
  if (e.train_labels.cols() != e.label_count) throw ModelFormatError("label section disagrees with header");

  for (;;) {
    s = read_section(in);
    if (s.tag == kEnd) break;
    if (s.tag != kLearner) throw ModelFormatError("unknown section");
    Reader r(s.payload);
    Learner learner;
    learner.centroids = r.dense();
    const std::size_t clusters = r.size();
    if (static_cast<std::size_t>(learner.centroids.cols()) != clusters) throw ModelFormatError("centroid count mismatch");
    if (static_cast<std::size_t>(learner.centroids.rows()) != e.feature_dim) throw ModelFormatError("centroid dimension mismatch");
    learner.clusters.resize(clusters);
    for (auto& c : learner.clusters) {
      c.members.resize(r.size());
      for (auto& m : c.members) {
        m = static_cast<Index>(r.u32());
        if (static_cast<std::size_t>(m) >= e.train_labels.rows()) throw ModelFormatError("member id out of range");
      }
      c.regressor = r.u8() == 1 ? SparseMatrix::from_dense(r.dense()) : r.sparse();
      c.embeddings = r.dense();
      if (static_cast<std::size_t>(c.embeddings.cols()) != c.members.size() ||
          static_cast<std::size_t>(c.embeddings.rows()) != e.hyper.l_hat ||
          c.regressor.cols() != e.hyper.l_hat || c.regressor.rows() != e.feature_dim) {
        throw ModelFormatError("cluster block shape mismatch");
      }
    }
    if (!r.done()) throw ModelFormatError("trailing bytes in learner section");
    e.learners.push_back(std::move(learner));
  }
  if (e.learners.size() != expected_learners) throw ModelFormatError("learner count mismatch");
  if (in.peek() != std::char_traits<char>::eof()) throw ModelFormatError("trailing bytes after end section");
  return e;
}

Ensemble load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_model(in);
}

std::size_t model_size_bytes(const Ensemble& ensemble) {
  std::ostringstream out;
  write_model(ensemble, out, false);
  return out.str().size();
}

std::size_t dense_model_size_bytes(const Ensemble& ensemble) {
  std::ostringstream out;
  write_model(ensemble, out, true);
  return out.str().size();
}

}  // namespace localembed
