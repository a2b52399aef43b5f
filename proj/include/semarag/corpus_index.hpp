#pragma once

// Corpus ingestion and exact dense retrieval. Documents are chunked, hashed
// into stable ids and embedded once; the resulting VectorIndex is immutable
// and answers top-k inner-product queries by exhaustive scan.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semarag/config.hpp"
#include "semarag/domain.hpp"
#include "semarag/json_io.hpp"

namespace semarag {

// ---------------------------------------------------------------------------
// Embedders
// ---------------------------------------------------------------------------

/// Dual encoder: separate query and document sides mapping into one space.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed_query(std::string_view text) const = 0;
  virtual std::vector<double> embed_doc(std::string_view text) const = 0;
  virtual std::vector<std::vector<double>> embed_docs(std::span<const std::string> texts) const;
  virtual std::size_t dimension() const = 0;
  /// Identity recorded in index manifests.
  virtual std::string tag() const = 0;
};

/// Signed feature hashing of character trigrams, L2-normalized. Both sides use
/// the same map, so inner product equals cosine similarity.
std::vector<double> embed_mock(std::string_view text, std::size_t dimension = 256,
                               std::uint64_t seed = 0);

class MockEmbedder : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dimension = 256, std::uint64_t seed = 0);

  std::vector<double> embed_query(std::string_view text) const override;
  std::vector<double> embed_doc(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string tag() const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

/// POST {"texts":[...], "side":"query"|"doc"} -> {"vectors":[[...], ...]}.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string url, std::size_t dimension, std::size_t batch_size = 32,
               int timeout_s = 60);

  std::vector<double> embed_query(std::string_view text) const override;
  std::vector<double> embed_doc(std::string_view text) const override;
  std::vector<std::vector<double>> embed_docs(std::span<const std::string> texts) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string tag() const override;

 private:
  std::vector<std::vector<double>> post(std::span<const std::string> texts, std::string_view side) const;

  std::string url_;
  std::size_t dimension_;
  std::size_t batch_size_;
  int timeout_s_;
};

std::shared_ptr<Embedder> make_embedder(const EmbedderSettings& settings);

// ---------------------------------------------------------------------------
// Corpus records and chunking
// ---------------------------------------------------------------------------

struct CorpusRecord {
  std::optional<std::string> id;
  std::string source;
  std::string title;
  std::string text;
  std::size_t line = 0;
};

/// One record per line: {"id"?, "source", "title", "text"}. Blank lines are
/// skipped. Throws MalformedCorpusRecord with the 1-based line number.
std::vector<CorpusRecord> read_corpus_jsonl(const std::filesystem::path& path);

struct Chunk {
  std::string parent_id;  // record id when given, else empty
  std::string source;
  std::string title;
  std::size_t offset = 0;
  std::string text;
  std::string doc_id;
};

/// Window start offsets for a text of `length` bytes. A text that fits in one
/// window yields {0}; longer texts get a window at every multiple of the
/// stride (max_chars - overlap) below `length`.
std::vector<std::size_t> chunk_offsets(std::size_t length, const ChunkingSettings& settings);

/// Windows over the record text; windows that are blank after trimming are
/// dropped. Offsets are snapped back to UTF-8 character boundaries.
std::vector<Chunk> chunk_record(const CorpusRecord& record, const ChunkingSettings& settings);

// ---------------------------------------------------------------------------
// Index
// ---------------------------------------------------------------------------

struct ScoredDoc {
  EvidenceDoc doc;
  double score = 0.0;
};

/// Sequential double-precision inner product.
double inner_product(std::span<const double> a, std::span<const double> b);

class VectorIndex {
 public:
  /// Embeds `docs` with the document encoder. Later duplicates of a doc_id
  /// are skipped. Throws EmbedderDimensionMismatch on a bad vector.
  static VectorIndex build(std::vector<EvidenceDoc> docs, const Embedder& embedder);

  /// Assembles an index from stored parts (row-major matrix).
  static VectorIndex from_parts(std::vector<EvidenceDoc> docs, std::vector<double> matrix,
                                std::size_t dimension, std::string embedder_tag);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  const std::string& embedder_tag() const noexcept { return tag_; }

  const EvidenceDoc& doc(std::size_t i) const { return docs_.at(i); }
  std::span<const double> vector(std::size_t i) const;
  std::vector<std::string> doc_ids() const;

  /// Exactly min(k, size) documents by descending inner product, ties broken
  /// by ascending doc_id. Throws EmptyIndex, EmbedderDimensionMismatch.
  std::vector<ScoredDoc> topk(std::span<const double> query, std::size_t k) const;

  /// SHA-256 over ids, metadata and raw vector bytes.
  std::string content_hash() const;
  Json manifest() const;

  /// Writes manifest.json, docs.jsonl and vectors.f64 into `dir`.
  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

 private:
  VectorIndex() = default;

  std::vector<EvidenceDoc> docs_;
  std::vector<double> matrix_;
  std::size_t dimension_ = 0;
  std::string tag_;
};

/// Chunks and embeds every corpus file into one globally ranked index.
VectorIndex ingest(std::span<const std::filesystem::path> corpus_files,
                   const ChunkingSettings& chunking, const Embedder& embedder);

/// Text-in, ranked-documents-out retrieval. The explorer only sees this.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<ScoredDoc> topk(std::string_view query, std::size_t k) const = 0;
};

class DenseRetriever : public Retriever {
 public:
  /// Throws IndexFormatError when embedder and index disagree on dimension
  /// or tag.
  DenseRetriever(std::shared_ptr<const VectorIndex> index, std::shared_ptr<const Embedder> embedder);

  std::vector<ScoredDoc> topk(std::string_view query, std::size_t k) const override;
  const VectorIndex& index() const noexcept { return *index_; }

 private:
  std::shared_ptr<const VectorIndex> index_;
  std::shared_ptr<const Embedder> embedder_;
};

}  // namespace semarag
