#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/random.hpp"
#include "taxoforge/text.hpp"

namespace taxoforge {

struct EmbeddingConfig {
  int dim = 100;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double lr0 = 0.05;
  int min_count = 2;
  int ngram_min = 3;
  int ngram_max = 6;
  std::uint32_t buckets = 262144;
  double subsample_t = 1e-4;
  std::uint64_t seed = 42;

  void validate() const {
    auto bad = [](const char* what) { return Error(ErrorCode::kInvalidArgument, what); };
    if (dim < 1) throw bad("dim must be >= 1");
    if (window < 1) throw bad("window must be >= 1");
    if (negatives < 1) throw bad("negatives must be >= 1");
    if (epochs < 0) throw bad("epochs must be >= 0");
    if (!(lr0 > 0)) throw bad("lr0 must be > 0");
    if (min_count < 1) throw bad("min_count must be >= 1");
    if (ngram_min < 1 || ngram_min > ngram_max) throw bad("need 1 <= ngram_min <= ngram_max");
    if (buckets < 1) throw bad("buckets must be >= 1");
    if (!(subsample_t > 0)) throw bad("subsample_t must be > 0");
  }
};

/// Character n-grams of "<word>" (code points, lengths ngram_min..ngram_max,
/// scan order, duplicates kept) hashed with FNV-1a/64 modulo `buckets`.
inline std::vector<std::uint32_t> subword_ids(std::string_view word, const EmbeddingConfig& cfg) {
  std::string wrapped = "<" + std::string(word) + ">";
  auto cps = utf8_code_points(wrapped);
  std::vector<std::uint32_t> ids;
  const auto n_cp = static_cast<int>(cps.size());
  for (int n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
    for (int start = 0; start + n <= n_cp; ++start) {
      const char* begin = cps[start].data();
      const char* end = cps[start + n - 1].data() + cps[start + n - 1].size();
      auto h = fnv1a64(std::string_view(begin, static_cast<std::size_t>(end - begin)));
      ids.push_back(static_cast<std::uint32_t>(h % cfg.buckets));
    }
  }
  return ids;
}

// --- skip-gram negative-sampling objective --------------------------------

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

/// log(sigmoid(x)) without overflow for large |x|.
template <typename T>
T log_sigmoid(T x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

template <typename T, typename U>
T dot(std::span<const T> a, std::span<const U> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * static_cast<T>(b[i]);
  return s;
}

/// One target of the objective: label 1 for the observed context, 0 for a
/// negative. Adds dLoss/dh into `grad_hidden`, writes dLoss/du into
/// `grad_output`, and returns this target's loss contribution.
template <typename T, typename U>
T sgns_target_gradient(std::span<const T> hidden, std::span<const U> output_row, int label,
                       std::span<T> grad_hidden, std::span<T> grad_output) {
  const T score = dot(hidden, output_row);
  const T p = sigmoid(score);
  const T g = p - static_cast<T>(label);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    grad_hidden[i] += g * static_cast<T>(output_row[i]);
    grad_output[i] = g * hidden[i];
  }
  return label == 1 ? -log_sigmoid(score) : -log_sigmoid(-score);
}

/// Parameters of a single (center, context, negatives) term in isolation;
/// used for gradient checks and as documentation of the training update.
template <typename T>
struct SgnsTerm {
  std::vector<std::vector<T>> input_rows;  // word row and subword rows of the center
  std::vector<T> context;                  // output row of the observed context
  std::vector<std::vector<T>> negatives;   // output rows of the negative samples
};

template <typename T>
std::vector<T> mean_of_rows(const std::vector<std::vector<T>>& rows) {
  std::vector<T> h(rows.front().size(), T(0));
  for (const auto& r : rows)
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += r[i];
  for (auto& x : h) x /= static_cast<T>(rows.size());
  return h;
}

/// -log σ(u_c·h) - Σ log σ(-u_n·h), h = mean of the input rows.
template <typename T>
T sgns_loss(const SgnsTerm<T>& term) {
  auto h = mean_of_rows(term.input_rows);
  std::span<const T> hs(h);
  T loss = -log_sigmoid(dot(hs, std::span<const T>(term.context)));
  for (const auto& n : term.negatives) loss -= log_sigmoid(-dot(hs, std::span<const T>(n)));
  return loss;
}

/// Analytic gradient of sgns_loss with the same shape as the term.
template <typename T>
SgnsTerm<T> sgns_gradient(const SgnsTerm<T>& term) {
  auto h = mean_of_rows(term.input_rows);
  const std::size_t dim = h.size();
  std::vector<T> grad_h(dim, T(0));
  SgnsTerm<T> grad;
  grad.context.assign(dim, T(0));
  sgns_target_gradient<T, T>(h, term.context, 1, grad_h, grad.context);
  for (const auto& n : term.negatives) {
    grad.negatives.emplace_back(dim, T(0));
    sgns_target_gradient<T, T>(h, n, 0, grad_h, grad.negatives.back());
  }
  const T inv = T(1) / static_cast<T>(term.input_rows.size());
  for (std::size_t r = 0; r < term.input_rows.size(); ++r) {
    grad.input_rows.emplace_back(dim);
    for (std::size_t i = 0; i < dim; ++i) grad.input_rows.back()[i] = grad_h[i] * inv;
  }
  return grad;
}

// --- model ------------------------------------------------------------------

struct PhraseVector {
  std::vector<double> values;
  bool degenerate = true;
};

class EmbeddingModel;
EmbeddingModel train_on_lines(const std::vector<std::string>& lines, const EmbeddingConfig& cfg);
EmbeddingModel deserialize_model(std::istream& in);

/// Word rows followed by subword bucket rows (input side) and per-word output
/// rows. Immutable once trained; safe to share across threads.
class EmbeddingModel {
 public:
  const EmbeddingConfig& config() const { return config_; }
  std::size_t dim() const { return static_cast<std::size_t>(config_.dim); }
  std::size_t vocab_size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  std::uint64_t frequency(std::size_t word) const { return freqs_.at(word); }

  std::optional<std::size_t> word_index(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const float> input_row(std::size_t row) const {
    return {input_.data() + row * dim(), dim()};
  }
  std::span<const float> output_row(std::size_t word) const {
    return {output_.data() + word * dim(), dim()};
  }
  std::size_t input_rows() const { return input_.size() / dim(); }

  /// Input-matrix rows composing a token: its word row when in vocabulary,
  /// then one row per subword n-gram.
  std::vector<std::size_t> token_rows(std::string_view token) const {
    std::vector<std::size_t> rows;
    if (token.empty()) return rows;
    if (auto w = word_index(token)) rows.push_back(*w);
    for (auto b : subword_ids(token, config_)) rows.push_back(words_.size() + b);
    return rows;
  }

  /// Mean of the token's rows; empty when the token has no rows.
  std::vector<double> token_vector(std::string_view token) const {
    auto rows = token_rows(token);
    if (rows.empty()) return {};
    std::vector<double> v(dim(), 0.0);
    for (auto r : rows) {
      auto row = input_row(r);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += row[i];
    }
    for (auto& x : v) x /= static_cast<double>(rows.size());
    return v;
  }

  bool operator==(const EmbeddingModel& o) const {
    return words_ == o.words_ && freqs_ == o.freqs_ && input_ == o.input_ && output_ == o.output_ &&
           config_.dim == o.config_.dim && config_.buckets == o.config_.buckets &&
           config_.ngram_min == o.config_.ngram_min && config_.ngram_max == o.config_.ngram_max &&
           config_.seed == o.config_.seed;
  }

 private:
  friend EmbeddingModel train_on_lines(const std::vector<std::string>&, const EmbeddingConfig&);
  friend EmbeddingModel deserialize_model(std::istream&);

  EmbeddingConfig config_;
  std::vector<std::string> words_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> input_;
  std::vector<float> output_;
};

/// Trains subword skip-gram with negative sampling over pre-split lines (one
/// listing description each). Single-threaded and fully determined by
/// cfg.seed.
inline EmbeddingModel train_on_lines(const std::vector<std::string>& lines, const EmbeddingConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(lines.size());
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t raw_tokens = 0;
  for (const auto& line : lines) {
    tokenized.push_back(tokenize(line));
    for (const auto& tok : tokenized.back()) ++counts[tok];
    raw_tokens += tokenized.back().size();
  }
  if (raw_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "corpus is empty");

  EmbeddingModel m;
  m.config_ = cfg;
  std::vector<std::pair<std::string, std::uint64_t>> vocab;
  for (const auto& [w, c] : counts) {
    if (c >= static_cast<std::uint64_t>(cfg.min_count)) vocab.emplace_back(w, c);
  }
  if (vocab.empty()) throw Error(ErrorCode::kInvalidArgument, "no word reaches min_count");
  std::sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    m.words_.push_back(vocab[i].first);
    m.freqs_.push_back(vocab[i].second);
    m.index_.emplace(vocab[i].first, i);
  }

  const std::size_t dim = m.dim();
  const std::size_t n_words = m.words_.size();
  Rng rng(cfg.seed);
  m.input_.resize((n_words + cfg.buckets) * dim);
  const double bound = 1.0 / static_cast<double>(dim);
  for (auto& x : m.input_) x = static_cast<float>(uniform_real(rng, -bound, bound));
  m.output_.assign(n_words * dim, 0.0f);

  // Corpus as vocabulary ids; out-of-vocabulary tokens are dropped.
  std::vector<std::vector<std::uint32_t>> corpus;
  std::uint64_t vocab_tokens = 0;
  for (const auto& toks : tokenized) {
    std::vector<std::uint32_t> ids;
    for (const auto& tok : toks) {
      if (auto w = m.word_index(tok)) ids.push_back(static_cast<std::uint32_t>(*w));
    }
    vocab_tokens += ids.size();
    corpus.push_back(std::move(ids));
  }

  std::vector<std::vector<std::size_t>> rows_of(n_words);
  std::vector<double> keep_prob(n_words);
  std::vector<double> neg_cdf(n_words);
  double acc = 0;
  for (std::size_t w = 0; w < n_words; ++w) {
    rows_of[w] = m.token_rows(m.words_[w]);
    const double f = static_cast<double>(m.freqs_[w]) / static_cast<double>(vocab_tokens);
    keep_prob[w] = std::min(1.0, std::sqrt(cfg.subsample_t / f));
    acc += std::pow(static_cast<double>(m.freqs_[w]), 0.75);
    neg_cdf[w] = acc;
  }
  auto draw_negative = [&](std::uint32_t avoid) {
    while (true) {
      const double u = uniform01(rng) * acc;
      auto it = std::upper_bound(neg_cdf.begin(), neg_cdf.end(), u);
      auto w = static_cast<std::uint32_t>(std::min<std::size_t>(it - neg_cdf.begin(), n_words - 1));
      if (w != avoid || n_words == 1) return w;
    }
  };

  const double total = static_cast<double>(vocab_tokens) * cfg.epochs;
  std::uint64_t processed = 0;
  std::vector<double> hidden(dim), grad_hidden(dim), grad_output(dim);

  auto update = [&](std::uint32_t center, std::uint32_t target, double lr) {
    const auto& rows = rows_of[center];
    std::fill(hidden.begin(), hidden.end(), 0.0);
    for (auto r : rows) {
      const float* row = m.input_.data() + r * dim;
      for (std::size_t i = 0; i < dim; ++i) hidden[i] += row[i];
    }
    for (auto& x : hidden) x /= static_cast<double>(rows.size());
    std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0);

    auto step = [&](std::uint32_t word, int label) {
      std::span<float> out(m.output_.data() + word * dim, dim);
      sgns_target_gradient<double, float>(hidden, out, label, grad_hidden, grad_output);
      for (std::size_t i = 0; i < dim; ++i) out[i] -= static_cast<float>(lr * grad_output[i]);
    };
    step(target, 1);
    for (int n = 0; n < cfg.negatives; ++n) step(draw_negative(target), 0);

    // Every composing row takes the full hidden-vector step, not its 1/|rows|
    // share, so long words learn as fast as short ones.
    for (auto r : rows) {
      float* row = m.input_.data() + r * dim;
      for (std::size_t i = 0; i < dim; ++i) row[i] -= static_cast<float>(lr * grad_hidden[i]);
    }
  };

  std::vector<std::uint32_t> kept;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& line : corpus) {
      const double lr = cfg.lr0 * std::max(0.0, 1.0 - static_cast<double>(processed) / total);
      processed += line.size();
      kept.clear();
      for (auto w : line) {
        if (keep_prob[w] >= 1.0 || uniform01(rng) < keep_prob[w]) kept.push_back(w);
      }
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto span = static_cast<std::size_t>(1 + uniform_index(rng, cfg.window));
        const std::size_t lo = i >= span ? i - span : 0;
        const std::size_t hi = std::min(kept.size() - 1, i + span);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j != i) update(kept[i], kept[j], lr);
        }
      }
    }
  }
  return m;
}

inline EmbeddingModel train(const std::filesystem::path& corpus_path, const EmbeddingConfig& cfg) {
  return train_on_lines(io::read_lines(corpus_path), cfg);
}

// --- model file ---------------------------------------------------------------

namespace detail {

inline void write_float(std::ostream& out, float x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 9);
  out.write(buf, res.ptr - buf);
}

inline std::uint64_t header_field(const std::string& header, const std::string& key) {
  auto pos = header.find(" " + key + "=");
  if (pos == std::string::npos) throw Error(ErrorCode::kParse, "model header lacks " + key);
  pos += key.size() + 2;
  std::uint64_t v = 0;
  auto res = std::from_chars(header.data() + pos, header.data() + header.size(), v);
  if (res.ec != std::errc()) throw Error(ErrorCode::kParse, "bad model header field " + key);
  return v;
}

}  // namespace detail

inline void serialize_model(const EmbeddingModel& m, std::ostream& out) {
  const auto& c = m.config();
  out << "taxoforge-emb v1 dim=" << c.dim << " vocab=" << m.vocab_size() << " buckets=" << c.buckets
      << " ngmin=" << c.ngram_min << " ngmax=" << c.ngram_max << " seed=" << c.seed << "\n";
  for (std::size_t w = 0; w < m.vocab_size(); ++w) out << m.words()[w] << " " << m.frequency(w) << "\n";
  auto write_row = [&](std::span<const float> row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.put(' ');
      detail::write_float(out, row[i]);
    }
    out.put('\n');
  };
  for (std::size_t r = 0; r < m.input_rows(); ++r) write_row(m.input_row(r));
  for (std::size_t w = 0; w < m.vocab_size(); ++w) write_row(m.output_row(w));
}

inline EmbeddingModel deserialize_model(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || !header.starts_with("taxoforge-emb v1 ")) {
    throw Error(ErrorCode::kParse, "not a taxoforge-emb v1 model file");
  }
  EmbeddingModel m;
  m.config_.dim = static_cast<int>(detail::header_field(header, "dim"));
  m.config_.buckets = static_cast<std::uint32_t>(detail::header_field(header, "buckets"));
  m.config_.ngram_min = static_cast<int>(detail::header_field(header, "ngmin"));
  m.config_.ngram_max = static_cast<int>(detail::header_field(header, "ngmax"));
  m.config_.seed = detail::header_field(header, "seed");
  const auto vocab = detail::header_field(header, "vocab");
  m.config_.validate();

  std::string line;
  for (std::uint64_t w = 0; w < vocab; ++w) {
    if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "model file truncated in vocabulary");
    auto sp = line.rfind(' ');
    if (sp == std::string::npos || sp == 0) throw Error(ErrorCode::kParse, "bad vocabulary line: " + line);
    std::uint64_t f = 0;
    auto res = std::from_chars(line.data() + sp + 1, line.data() + line.size(), f);
    if (res.ec != std::errc()) throw Error(ErrorCode::kParse, "bad frequency: " + line);
    m.words_.push_back(line.substr(0, sp));
    m.freqs_.push_back(f);
    m.index_.emplace(m.words_.back(), w);
  }
  const std::size_t dim = m.dim();
  auto read_rows = [&](std::vector<float>& dst, std::size_t n_rows) {
    dst.resize(n_rows * dim);
    for (std::size_t r = 0; r < n_rows; ++r) {
      if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "model file truncated in vectors");
      const char* p = line.data();
      const char* end = p + line.size();
      for (std::size_t i = 0; i < dim; ++i) {
        while (p < end && *p == ' ') ++p;
        auto res = std::from_chars(p, end, dst[r * dim + i], std::chars_format::general);
        if (res.ec != std::errc()) throw Error(ErrorCode::kParse, "bad vector value in row " + std::to_string(r));
        p = res.ptr;
      }
    }
  };
  read_rows(m.input_, m.words_.size() + m.config_.buckets);
  read_rows(m.output_, m.words_.size());
  return m;
}

inline void save_model(const EmbeddingModel& m, const std::filesystem::path& path) {
  io::write_atomic(path, [&](std::ostream& out) { serialize_model(m, out); });
}

inline EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return deserialize_model(in);
}

// --- phrase vectors and lookup ----------------------------------------------

/// Non-throwing phrase embedding: mean of token vectors, L2-normalized; the
/// degenerate flag is set when nothing is representable.
inline PhraseVector embed(const EmbeddingModel& m, std::string_view phrase) {
  PhraseVector pv;
  pv.values.assign(m.dim(), 0.0);
  std::size_t used = 0;
  for (const auto& tok : tokenize(phrase)) {
    auto v = m.token_vector(tok);
    if (v.empty()) continue;
    for (std::size_t i = 0; i < v.size(); ++i) pv.values[i] += v[i];
    ++used;
  }
  double norm = 0;
  for (double x : pv.values) norm += x * x;
  norm = std::sqrt(norm);
  if (used == 0 || !(norm > 0) || !std::isfinite(norm)) return pv;
  for (auto& x : pv.values) x /= norm;
  pv.degenerate = false;
  return pv;
}

inline PhraseVector phrase_vector(const EmbeddingModel& m, std::string_view phrase) {
  auto pv = embed(m, phrase);
  if (pv.degenerate) {
    throw Error(ErrorCode::kDegenerate, "phrase '" + std::string(phrase) + "' has no representable tokens");
  }
  return pv;
}

/// Normalizes raw values into a phrase vector (degenerate when all zero).
inline PhraseVector make_phrase_vector(std::vector<double> values) {
  PhraseVector pv{std::move(values), true};
  double norm = 0;
  for (double x : pv.values) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0 && std::isfinite(norm)) {
    for (auto& x : pv.values) x /= norm;
    pv.degenerate = false;
  }
  return pv;
}

inline double cosine(const PhraseVector& a, const PhraseVector& b) {
  if (a.degenerate || b.degenerate) throw Error(ErrorCode::kDegenerate, "cosine of a degenerate vector");
  if (a.values.size() != b.values.size()) throw Error(ErrorCode::kInvalidArgument, "dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return std::clamp(s, -1.0, 1.0);
}

struct LabeledVector {
  std::string label;
  PhraseVector vector;
};

struct Neighbor {
  std::string label;
  double similarity = 0;
  std::size_t position = 0;  // index into the searched list
};

/// Exhaustive cosine argmax; ties go to the lexicographically smallest label.
/// Degenerate index entries are ignored.
inline Neighbor nearest_neighbor(std::span<const LabeledVector> index, const PhraseVector& query) {
  if (query.degenerate) throw Error(ErrorCode::kDegenerate, "degenerate query vector");
  std::optional<Neighbor> best;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i].vector.degenerate) continue;
    const double sim = cosine(index[i].vector, query);
    if (!best || sim > best->similarity || (sim == best->similarity && index[i].label < best->label)) {
      best = Neighbor{index[i].label, sim, i};
    }
  }
  if (!best) throw Error(ErrorCode::kInvalidArgument, "nearest_neighbor over an empty index");
  return *best;
}

}  // namespace taxoforge
