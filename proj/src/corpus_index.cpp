#include "semarag/corpus_index.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "semarag/errors.hpp"
#include "semarag/text.hpp"

namespace semarag {

// ---------------------------------------------------------------------------
// Embedders
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> Embedder::embed_docs(std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_doc(t));
  return out;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t feature_hash(std::string_view gram, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed + 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : gram) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

std::string normalize_for_ngrams(std::string_view text) {
  std::string out = " ";
  bool space = true;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!space) out += ' ';
      space = true;
    } else {
      out += static_cast<char>(std::tolower(c));
      space = false;
    }
  }
  if (!space) out += ' ';
  return out;
}

}  // namespace

std::vector<double> embed_mock(std::string_view text, std::size_t dimension, std::uint64_t seed) {
  std::vector<double> v(dimension, 0.0);
  if (dimension == 0) return v;
  const std::string padded = normalize_for_ngrams(text);

  auto add = [&](std::string_view gram) {
    const auto h = feature_hash(gram, seed);
    v[h % dimension] += (h >> 63) ? -1.0 : 1.0;
  };
  if (padded.size() < 3) {
    add(padded);
  } else {
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add(std::string_view(padded).substr(i, 3));
  }

  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0.0) {
    // signed features cancelled out; fall back to a deterministic basis vector
    v[feature_hash(padded, seed) % dimension] = 1.0;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

MockEmbedder::MockEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw ConfigError("mock embedder dimension must be >= 1");
}

std::vector<double> MockEmbedder::embed_query(std::string_view text) const {
  return embed_mock(text, dimension_, seed_);
}

std::vector<double> MockEmbedder::embed_doc(std::string_view text) const { return embed_mock(text, dimension_, seed_); }

std::string MockEmbedder::tag() const {
  return "mock-ngram3-d" + std::to_string(dimension_) + "-s" + std::to_string(seed_);
}

std::shared_ptr<Embedder> make_embedder(const EmbedderSettings& settings) {
  if (settings.kind == EmbedderKind::mock) return std::make_shared<MockEmbedder>(settings.dimension, settings.seed);
  return std::make_shared<HttpEmbedder>(settings.url, settings.dimension);
}

// ---------------------------------------------------------------------------
// Corpus records and chunking
// ---------------------------------------------------------------------------

std::vector<CorpusRecord> read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw MalformedCorpusRecord(path.string(), lineno, "not valid JSON");
    if (!j.is_object()) throw MalformedCorpusRecord(path.string(), lineno, "not a JSON object");
    for (const char* key : {"source", "title", "text"}) {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw MalformedCorpusRecord(path.string(), lineno, std::string("missing string field '") + key + "'");
      }
    }
    CorpusRecord r;
    if (j.contains("id") && !j.at("id").is_null()) {
      r.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    }
    r.source = j.at("source").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.line = lineno;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::size_t> chunk_offsets(std::size_t length, const ChunkingSettings& settings) {
  if (settings.max_chars == 0 || settings.overlap >= settings.max_chars) {
    throw ConfigError("chunking requires 0 <= overlap < max_chars");
  }
  if (length <= settings.max_chars) return {0};
  const std::size_t stride = settings.max_chars - settings.overlap;
  std::vector<std::size_t> out;
  for (std::size_t start = 0; start < length; start += stride) out.push_back(start);
  return out;
}

std::vector<Chunk> chunk_record(const CorpusRecord& record, const ChunkingSettings& settings) {
  std::vector<Chunk> out;
  const std::string_view text = record.text;
  auto boundary = [&](std::size_t pos) {
    while (pos > 0 && pos < text.size() && (static_cast<unsigned char>(text[pos]) & 0xC0) == 0x80) --pos;
    return pos;
  };
  for (std::size_t raw_start : chunk_offsets(text.size(), settings)) {
    const std::size_t start = boundary(raw_start);
    const std::size_t end = boundary(std::min(text.size(), start + settings.max_chars));
    if (end <= start) continue;
    const auto window = text.substr(start, end - start);
    if (trim_view(window).empty()) continue;
    Chunk c;
    c.parent_id = record.id.value_or("");
    c.source = record.source;
    c.title = record.title;
    c.offset = start;
    c.text = std::string(window);
    c.doc_id = derive_doc_id(c.source, c.title, c.text);
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// VectorIndex
// ---------------------------------------------------------------------------

double inner_product(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

VectorIndex VectorIndex::build(std::vector<EvidenceDoc> docs, const Embedder& embedder) {
  VectorIndex idx;
  idx.dimension_ = embedder.dimension();
  idx.tag_ = embedder.tag();

  std::unordered_set<std::string> seen;
  std::vector<std::string> texts;
  for (auto& d : docs) {
    if (!seen.insert(d.doc_id).second) continue;
    d.embedding.reset();
    texts.push_back(d.title.empty() ? d.text : d.title + "\n" + d.text);
    idx.docs_.push_back(std::move(d));
  }

  const auto vectors = embedder.embed_docs(texts);
  if (vectors.size() != texts.size()) throw EmbedderDimensionMismatch(texts.size(), vectors.size());
  idx.matrix_.reserve(vectors.size() * idx.dimension_);
  for (const auto& v : vectors) {
    if (v.size() != idx.dimension_) throw EmbedderDimensionMismatch(idx.dimension_, v.size());
    idx.matrix_.insert(idx.matrix_.end(), v.begin(), v.end());
  }
  return idx;
}

VectorIndex VectorIndex::from_parts(std::vector<EvidenceDoc> docs, std::vector<double> matrix, std::size_t dimension,
                                    std::string embedder_tag) {
  if (dimension == 0) throw IndexFormatError("index dimension must be >= 1");
  if (matrix.size() != docs.size() * dimension) {
    throw IndexFormatError("matrix holds " + std::to_string(matrix.size()) + " values, expected " +
                           std::to_string(docs.size() * dimension));
  }
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    if (!seen.insert(d.doc_id).second) throw IndexFormatError("duplicate doc_id " + d.doc_id);
  }
  VectorIndex idx;
  idx.docs_ = std::move(docs);
  idx.matrix_ = std::move(matrix);
  idx.dimension_ = dimension;
  idx.tag_ = std::move(embedder_tag);
  return idx;
}

std::span<const double> VectorIndex::vector(std::size_t i) const {
  if (i >= docs_.size()) throw std::out_of_range("vector index out of range");
  return std::span<const double>(matrix_).subspan(i * dimension_, dimension_);
}

std::vector<std::string> VectorIndex::doc_ids() const {
  std::vector<std::string> out;
  out.reserve(docs_.size());
  for (const auto& d : docs_) out.push_back(d.doc_id);
  return out;
}

std::vector<ScoredDoc> VectorIndex::topk(std::span<const double> query, std::size_t k) const {
  if (docs_.empty()) throw EmptyIndex();
  if (query.size() != dimension_) throw EmbedderDimensionMismatch(dimension_, query.size());
  const std::size_t n = docs_.size();
  k = std::min(k, n);

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = inner_product(query, vector(i));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return docs_[a].doc_id < docs_[b].doc_id;
                    });

  std::vector<ScoredDoc> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) out.push_back({docs_[order[r]], scores[order[r]]});
  return out;
}

std::string VectorIndex::content_hash() const {
  std::string material;
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& d = docs_[i];
    material += d.doc_id + '\x1f' + d.source_corpus + '\x1f' + d.title + '\x1f' + d.text + '\x1e';
    const auto v = vector(i);
    material.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
  }
  return sha256_hex(material);
}

Json VectorIndex::manifest() const {
  return Json{{"format", "semarag-index/1"},
              {"embedder", tag_},
              {"dimension", dimension_},
              {"doc_count", docs_.size()},
              {"content_hash", content_hash()}};
}

void VectorIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "docs.jsonl", std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / "docs.jsonl").string());
    for (const auto& d : docs_) {
      out << dump_line(Json{{"doc_id", d.doc_id}, {"source", d.source_corpus}, {"title", d.title}, {"text", d.text}})
          << '\n';
    }
  }
  {
    std::ofstream out(dir / "vectors.f64", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / "vectors.f64").string());
    out.write(reinterpret_cast<const char*>(matrix_.data()), static_cast<std::streamsize>(matrix_.size() * sizeof(double)));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest().dump(2) << '\n';
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw IndexFormatError("no manifest.json in " + dir.string());
  auto manifest = Json::parse(mf, nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) throw IndexFormatError("manifest.json is not valid JSON");

  std::vector<EvidenceDoc> docs;
  {
    std::ifstream in(dir / "docs.jsonl");
    if (!in) throw IndexFormatError("no docs.jsonl in " + dir.string());
    std::string line;
    while (std::getline(in, line)) {
      if (trim_view(line).empty()) continue;
      auto j = Json::parse(line, nullptr, false);
      if (j.is_discarded()) throw IndexFormatError("docs.jsonl holds an invalid line");
      EvidenceDoc d;
      d.doc_id = j.at("doc_id").get<std::string>();
      d.source_corpus = j.at("source").get<std::string>();
      d.title = j.at("title").get<std::string>();
      d.text = j.at("text").get<std::string>();
      docs.push_back(std::move(d));
    }
  }

  const auto dim = manifest.at("dimension").get<std::size_t>();
  std::vector<double> matrix(docs.size() * dim);
  {
    std::ifstream in(dir / "vectors.f64", std::ios::binary);
    if (!in) throw IndexFormatError("no vectors.f64 in " + dir.string());
    in.read(reinterpret_cast<char*>(matrix.data()), static_cast<std::streamsize>(matrix.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(matrix.size() * sizeof(double)) || in.peek() != EOF) {
      throw IndexFormatError("vectors.f64 size does not match the manifest");
    }
  }

  auto idx = from_parts(std::move(docs), std::move(matrix), dim, manifest.at("embedder").get<std::string>());
  if (idx.size() != manifest.at("doc_count").get<std::size_t>()) throw IndexFormatError("doc_count mismatch");
  if (idx.content_hash() != manifest.at("content_hash").get<std::string>()) {
    throw IndexFormatError("content hash mismatch; index files are inconsistent");
  }
  return idx;
}

VectorIndex ingest(std::span<const std::filesystem::path> corpus_files, const ChunkingSettings& chunking,
                   const Embedder& embedder) {
  std::vector<EvidenceDoc> docs;
  std::unordered_set<std::string> seen;
  std::size_t duplicates = 0;
  for (const auto& path : corpus_files) {
    for (const auto& record : read_corpus_jsonl(path)) {
      for (auto& chunk : chunk_record(record, chunking)) {
        if (!seen.insert(chunk.doc_id).second) {
          ++duplicates;
          continue;
        }
        EvidenceDoc d;
        d.doc_id = std::move(chunk.doc_id);
        d.source_corpus = std::move(chunk.source);
        d.title = std::move(chunk.title);
        d.text = std::move(chunk.text);
        docs.push_back(std::move(d));
      }
    }
  }
  if (duplicates) spdlog::info("ingest: skipped {} duplicate chunks", duplicates);
  return VectorIndex::build(std::move(docs), embedder);
}

// ---------------------------------------------------------------------------
// DenseRetriever
// ---------------------------------------------------------------------------

DenseRetriever::DenseRetriever(std::shared_ptr<const VectorIndex> index, std::shared_ptr<const Embedder> embedder)
    : index_(std::move(index)), embedder_(std::move(embedder)) {
  if (!index_ || !embedder_) throw ConfigError("retriever needs an index and an embedder");
  if (index_->dimension() != embedder_->dimension()) {
    throw IndexFormatError("index dimension " + std::to_string(index_->dimension()) + " != embedder dimension " +
                           std::to_string(embedder_->dimension()));
  }
  if (index_->embedder_tag() != embedder_->tag()) {
    throw IndexFormatError("index was built with '" + index_->embedder_tag() + "', not '" + embedder_->tag() + "'");
  }
}

std::vector<ScoredDoc> DenseRetriever::topk(std::string_view query, std::size_t k) const {
  const auto q = embedder_->embed_query(query);
  return index_->topk(q, k);
}

}  // namespace semarag
