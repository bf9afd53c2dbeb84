#include "osda/embstore.hpp"

#include <numeric>
#include <string>

#include "osda/binio.hpp"
#include "osda/errors.hpp"

namespace osda {

namespace {
constexpr std::string_view kEmbMagic = "EMB1";
constexpr std::string_view kLgtMagic = "LGT1";
constexpr std::string_view kLblMagic = "LBL1";
}  // namespace

EmbeddingSet::EmbeddingSet(Matrix m) : data(std::move(m)), ids(static_cast<std::size_t>(data.rows())) {
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  return EmbeddingSet(binio::read_matrix(path, kEmbMagic));
}

SourceLogits load_logits(const std::filesystem::path& path) {
  SourceLogits l{binio::read_matrix(path, kLgtMagic)};
  if (l.c() < 2) throw Error(Errc::BadShape, path.string() + ": logits need at least 2 classes");
  return l;
}

LabelSet load_labels(const std::filesystem::path& path, std::uint32_t num_closed) {
  auto r = binio::Reader::open(path);
  r.expect_magic(kLblMagic);
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (rows == 0 || cols != 1) {
    throw Error(Errc::EmptyMatrix, path.string() + ": label files are n x 1 with n >= 1");
  }
  r.require(std::size_t{rows} * 4);
  LabelSet y;
  y.num_closed = num_closed;
  y.labels.resize(rows);
  for (auto& v : y.labels) v = r.u32();
  r.finish();
  return y;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& e) {
  binio::write_matrix(path, kEmbMagic, e.data);
}

void write_logits(const std::filesystem::path& path, const SourceLogits& l) {
  binio::write_matrix(path, kLgtMagic, l.data);
}

void write_labels(const std::filesystem::path& path, const LabelSet& y) {
  binio::Writer w;
  w.magic(kLblMagic);
  w.u32(static_cast<std::uint32_t>(y.labels.size()));
  w.u32(1);
  for (auto v : y.labels) w.u32(v);
  w.save(path);
}

AlignedDataset validate_alignment(EmbeddingSet e, SourceLogits l, std::optional<LabelSet> y) {
  const bool labels_ok = !y || y->n() == e.n();
  if (e.n() != l.n() || !labels_ok) {
    std::string msg = "embeddings n=" + std::to_string(e.n()) + ", logits n=" + std::to_string(l.n());
    if (y) msg += ", labels n=" + std::to_string(y->n());
    throw Error(Errc::CountMismatch, msg);
  }
  if (l.c() < 2) throw Error(Errc::BadShape, "logits need at least 2 classes");
  if (y && y->num_closed != static_cast<std::uint32_t>(l.c())) {
    throw Error(Errc::CountMismatch, "labels declare " + std::to_string(y->num_closed) +
                                         " closed classes, logits have " + std::to_string(l.c()));
  }
  return AlignedDataset{std::move(e), std::move(l), std::move(y)};
}

}  // namespace osda
