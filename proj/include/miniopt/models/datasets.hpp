#pragma once

// Seeded synthetic data: an order-1 Markov token stream for the tiny
// Transformer and a two-Gaussian blob set for the MLPs. Both are fully
// determined by (seed, sizes) so runs can be replayed exactly.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "miniopt/rng.hpp"

namespace miniopt::models {

// Tokens with a favored successor: from state s the chain moves to perm(s)
// with probability self_p, otherwise uniformly over the rest. self_p close
// to 1 gives a low conditional entropy floor for next-token prediction.
inline std::vector<std::uint16_t> make_markov_corpus(int vocab, std::int64_t length,
                                                     linalg::SeededRng& rng,
                                                     double favored_p = 0.9) {
  if (vocab < 2 || vocab > 65536) throw std::invalid_argument("make_markov_corpus: bad vocab");
  if (length < 1) throw std::invalid_argument("make_markov_corpus: bad length");
  if (favored_p <= 0.0 || favored_p >= 1.0) {
    throw std::invalid_argument("make_markov_corpus: favored_p must be in (0,1)");
  }
  // Fisher-Yates permutation as the favored-successor map.
  std::vector<int> perm(vocab);
  for (int i = 0; i < vocab; ++i) perm[i] = i;
  for (int i = vocab - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::uint16_t> corpus(static_cast<std::size_t>(length));
  int state = static_cast<int>(rng.next_below(vocab));
  for (std::int64_t t = 0; t < length; ++t) {
    corpus[static_cast<std::size_t>(t)] = static_cast<std::uint16_t>(state);
    if (rng.next_double() < favored_p) {
      state = perm[state];
    } else {
      int other = static_cast<int>(rng.next_below(vocab - 1));
      if (other >= perm[state]) ++other;
      state = other;
    }
  }
  return corpus;
}

// Empirical unigram entropy in nats; the loss floor any memoryless
// predictor can reach on the corpus.
inline double unigram_entropy(std::span<const std::uint16_t> corpus) {
  if (corpus.empty()) throw std::invalid_argument("unigram_entropy: empty corpus");
  std::map<std::uint16_t, std::int64_t> counts;
  for (auto t : corpus) ++counts[t];
  double h = 0.0;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [tok, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

// Binary token file: u16 little-endian ids, no framing.
inline void save_token_file(std::span<const std::uint16_t> corpus,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_token_file: cannot open " + path.string());
  for (std::uint16_t t : corpus) {
    const unsigned char bytes[2] = {static_cast<unsigned char>(t & 0xff),
                                    static_cast<unsigned char>(t >> 8)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
}

inline std::vector<std::uint16_t> load_token_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_token_file: cannot open " + path.string());
  std::vector<std::uint16_t> corpus;
  unsigned char bytes[2];
  while (in.read(reinterpret_cast<char*>(bytes), 2)) {
    corpus.push_back(static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8)));
  }
  return corpus;
}

struct TokenBatch {
  int batch = 0;
  int time = 0;
  std::vector<int> inputs;   // batch * time, row-major
  std::vector<int> targets;  // next-token ids, same shape
};

// Random contiguous windows; the rng fully determines the batch, so every
// optimizer in a race can be fed the identical data order.
inline TokenBatch sample_batch(std::span<const std::uint16_t> corpus, int batch, int time,
                               linalg::SeededRng& rng) {
  if (static_cast<std::int64_t>(corpus.size()) < time + 1) {
    throw std::invalid_argument("sample_batch: corpus shorter than one window");
  }
  TokenBatch b;
  b.batch = batch;
  b.time = time;
  b.inputs.resize(static_cast<std::size_t>(batch) * time);
  b.targets.resize(b.inputs.size());
  const std::uint64_t max_start = corpus.size() - static_cast<std::size_t>(time) - 1;
  for (int i = 0; i < batch; ++i) {
    const std::size_t start = static_cast<std::size_t>(rng.next_below(max_start + 1));
    for (int t = 0; t < time; ++t) {
      b.inputs[static_cast<std::size_t>(i) * time + t] = corpus[start + t];
      b.targets[static_cast<std::size_t>(i) * time + t] = corpus[start + t + 1];
    }
  }
  return b;
}

struct BlobBatch {
  int dim = 0;
  int size = 0;
  std::vector<double> x;   // size * dim, row-major
  std::vector<int> label;  // 0 or 1
};

// Two spherical Gaussian classes with means at -sep*e1 and +sep*e1 and unit
// variance. The Bayes rule on the first coordinate has accuracy Phi(sep).
inline BlobBatch make_blob_dataset(int dim, int n, double separation, linalg::SeededRng& rng) {
  if (dim < 1 || n < 1) throw std::invalid_argument("make_blob_dataset: bad sizes");
  BlobBatch b;
  b.dim = dim;
  b.size = n;
  b.x.resize(static_cast<std::size_t>(n) * dim);
  b.label.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.next_below(2));
    b.label[static_cast<std::size_t>(i)] = label;
    const double mean = label == 1 ? separation : -separation;
    double* row = b.x.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < dim; ++j) row[j] = (j == 0 ? mean : 0.0) + rng.gaussian();
  }
  return b;
}

// K spherical Gaussian classes, class c centered at sep * e_(c mod dim).
inline BlobBatch make_blob_multiclass(int dim, int n, int classes, double separation,
                                      linalg::SeededRng& rng) {
  if (dim < 1 || n < 1 || classes < 2) throw std::invalid_argument("make_blob_multiclass: bad sizes");
  BlobBatch b;
  b.dim = dim;
  b.size = n;
  b.x.resize(static_cast<std::size_t>(n) * dim);
  b.label.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
    b.label[static_cast<std::size_t>(i)] = label;
    const int axis = label % dim;
    double* row = b.x.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < dim; ++j) row[j] = (j == axis ? separation : 0.0) + rng.gaussian();
  }
  return b;
}

}  // namespace miniopt::models
