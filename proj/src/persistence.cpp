// Copyright 2026 The linrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "linrec/persistence.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <type_traits>

#include <unistd.h>

#include "linrec/error.hpp"

namespace linrec {
namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::array<char, 4> kGramMagic{'G', 'R', 'A', 'M'};
constexpr std::array<char, 4> kDenseMagic{'E', 'A', 'S', 'E'};
constexpr std::array<char, 4> kSparseMagic{'S', 'P', 'R', 'S'};

enum DenseFlag : std::uint32_t { kHasMu = 1, kHasWeights = 2, kHasGamma = 4, kHasPopularity = 8 };

template <typename T>
using UIntOf = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                  std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                     std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;

template <typename T>
void put(std::ostream& out, T value) {
  const auto bits = std::bit_cast<UIntOf<T>>(value);
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(buf.data(), buf.size());
}

template <typename T>
void put_array(std::ostream& out, const T* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
  } else {
    for (std::size_t i = 0; i < n; ++i) put(out, data[i]);
  }
}

void put_magic(std::ostream& out, const std::array<char, 4>& magic) { out.write(magic.data(), 4); }

void put_keys(std::ostream& out, const std::vector<std::string>& keys) {
  for (const auto& k : keys) {
    put(out, static_cast<std::uint32_t>(k.size()));
    out.write(k.data(), static_cast<std::streamsize>(k.size()));
  }
}

template <typename Matrix>
void put_row_major(std::ostream& out, const Matrix& m) {
  if constexpr (Matrix::IsRowMajor) {
    put_array(out, m.data(), static_cast<std::size_t>(m.size()));
  } else {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const Eigen::RowVectorXd row = m.row(i);
      put_array(out, row.data(), static_cast<std::size_t>(row.size()));
    }
  }
}

// Bounds-checked little-endian reader over a whole file.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open " + path.string());
    remaining_ = std::filesystem::file_size(path);
  }

  void need(std::uint64_t bytes) {
    if (bytes > remaining_) throw DataError(path_.string() + ": truncated or corrupt file");
  }

  void raw(char* dst, std::uint64_t bytes) {
    need(bytes);
    in_.read(dst, static_cast<std::streamsize>(bytes));
    if (!in_) throw DataError(path_.string() + ": read failed");
    remaining_ -= bytes;
  }

  template <typename T>
  T get() {
    std::array<unsigned char, sizeof(T)> buf;
    raw(reinterpret_cast<char*>(buf.data()), sizeof(T));
    UIntOf<T> bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<UIntOf<T>>(buf[i]) << (8 * i);
    return std::bit_cast<T>(bits);
  }

  template <typename T>
  void get_array(T* dst, std::uint64_t n) {
    need(n * sizeof(T));
    if constexpr (std::endian::native == std::endian::little) {
      raw(reinterpret_cast<char*>(dst), n * sizeof(T));
    } else {
      for (std::uint64_t i = 0; i < n; ++i) dst[i] = get<T>();
    }
  }

  void expect_magic(const std::array<char, 4>& magic) {
    std::array<char, 4> got{};
    raw(got.data(), 4);
    if (got != magic) {
      throw DataError(path_.string() + ": not a " + std::string(magic.data(), 4) + " file");
    }
    if (const auto v = get<std::uint32_t>(); v != kVersion) {
      throw DataError(path_.string() + ": unsupported format version " + std::to_string(v));
    }
  }

  std::vector<std::string> keys(std::uint64_t n) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, remaining_ / 4)));
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto len = get<std::uint32_t>();
      std::string k(len, '\0');
      raw(k.data(), len);
      out.push_back(std::move(k));
    }
    return out;
  }

  Eigen::VectorXd vector(std::uint64_t n) {
    need(n * 8);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    get_array(v.data(), n);
    return v;
  }

  RowMatrix square(std::uint64_t n) {
    need(n * n * 8);
    RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    get_array(m.data(), n * n);
    return m;
  }

  void expect_end() {
    if (remaining_ != 0) throw DataError(path_.string() + ": trailing bytes after payload");
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t remaining_ = 0;
};

void check_key_count(const std::vector<std::string>& keys, Eigen::Index n) {
  if (static_cast<Eigen::Index>(keys.size()) != n) {
    throw DataError("item key table has " + std::to_string(keys.size()) + " entries, model has " +
                    std::to_string(n) + " items");
  }
}

}  // namespace

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write " + tmp.string());
      writer(out);
      out.flush();
      if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

void save_gram(const std::filesystem::path& path, const GramStats& gram) {
  atomic_write(path, [&](std::ostream& out) {
    const auto n = static_cast<std::uint64_t>(gram.n_items());
    put_magic(out, kGramMagic);
    put(out, kVersion);
    put(out, n);
    put(out, static_cast<std::uint64_t>(gram.n_users));
    put(out, gram.flags);
    put(out, static_cast<std::uint8_t>(gram.mu ? 1 : 0));
    put(out, static_cast<std::uint8_t>(gram.self_product() ? 1 : 0));
    put_row_major(out, gram.g);
    if (!gram.self_product()) put_row_major(out, *gram.c);
    if (gram.mu) put_array(out, gram.mu->data(), n);
    put_array(out, gram.x_col_sums.data(), n);
  });
}

GramStats load_gram(const std::filesystem::path& path) {
  Reader in(path);
  in.expect_magic(kGramMagic);
  const auto n = in.get<std::uint64_t>();
  GramStats gram;
  gram.n_users = static_cast<std::size_t>(in.get<std::uint64_t>());
  gram.flags = in.get<std::uint32_t>();
  const bool has_mu = in.get<std::uint8_t>() != 0;
  const bool c_is_g = in.get<std::uint8_t>() != 0;
  gram.g = in.square(n);
  if (!c_is_g) gram.c = in.square(n);
  if (has_mu) gram.mu = in.vector(n);
  gram.x_col_sums = in.vector(n);
  in.expect_end();
  return gram;
}

void save_dense_model(const std::filesystem::path& path, const DenseModel& model,
                      const std::vector<std::string>& item_keys) {
  check_key_count(item_keys, model.n_items());
  atomic_write(path, [&](std::ostream& out) {
    const auto n = static_cast<std::uint64_t>(model.n_items());
    std::uint32_t flags = 0;
    if (model.mu) flags |= kHasMu;
    if (model.applied_item_weights) flags |= kHasWeights;
    if (model.gamma) flags |= kHasGamma;
    if (model.popularity) flags |= kHasPopularity;

    put_magic(out, kDenseMagic);
    put(out, kVersion);
    put(out, n);
    put(out, static_cast<std::uint32_t>(model.variant));
    put(out, model.lambda);
    put(out, flags);
    put_keys(out, item_keys);
    put_row_major(out, model.b);
    if (model.mu) put_array(out, model.mu->data(), n);
    if (model.applied_item_weights) {
      put(out, static_cast<std::uint32_t>(model.applied_item_weights->kind));
      put(out, model.applied_item_weights->alpha);
      put_array(out, model.applied_item_weights->w.data(), n);
    }
    if (model.gamma) put_array(out, model.gamma->data(), n);
    if (model.popularity) put_array(out, model.popularity->data(), n);
  });
}

DenseModelFile load_dense_model(const std::filesystem::path& path) {
  Reader in(path);
  in.expect_magic(kDenseMagic);
  const auto n = in.get<std::uint64_t>();
  DenseModelFile file;
  DenseModel& m = file.model;
  const auto variant = in.get<std::uint32_t>();
  if (variant > static_cast<std::uint32_t>(Variant::ease_xy)) {
    throw DataError(path.string() + ": unknown model variant " + std::to_string(variant));
  }
  m.variant = static_cast<Variant>(variant);
  m.lambda = in.get<double>();
  const auto flags = in.get<std::uint32_t>();
  file.item_keys = in.keys(n);
  m.b = in.square(n);
  if (flags & kHasMu) m.mu = in.vector(n);
  if (flags & kHasWeights) {
    ItemWeightVector w;
    const auto kind = in.get<std::uint32_t>();
    if (kind > static_cast<std::uint32_t>(WeightKind::time_adjusted)) {
      throw DataError(path.string() + ": unknown weight kind");
    }
    w.kind = static_cast<WeightKind>(kind);
    w.alpha = in.get<double>();
    w.w = in.vector(n);
    m.applied_item_weights = std::move(w);
  }
  if (flags & kHasGamma) m.gamma = in.vector(n);
  if (flags & kHasPopularity) m.popularity = in.vector(n);
  in.expect_end();
  return file;
}

void save_sparse_model(const std::filesystem::path& path, const SparseModel& model,
                       const std::vector<std::string>& item_keys) {
  check_key_count(item_keys, model.n_items());
  const auto& a = model.pattern;
  if (model.values.size() != a.nnz() || a.col_ptr.size() != a.n + 1) {
    throw DataError("sparse model arrays are inconsistent");
  }
  atomic_write(path, [&](std::ostream& out) {
    put_magic(out, kSparseMagic);
    put(out, kVersion);
    put(out, static_cast<std::uint64_t>(a.n));
    put(out, static_cast<std::uint64_t>(a.nnz()));
    put(out, model.lambda);
    put(out, a.threshold);
    put(out, static_cast<std::uint64_t>(a.n_max));
    put(out, static_cast<std::uint32_t>(a.source));
    for (auto p : a.col_ptr) put(out, static_cast<std::uint64_t>(p));
    for (auto r : a.row_idx) put(out, static_cast<std::uint32_t>(r));
    put_array(out, model.values.data(), model.values.size());
    put_keys(out, item_keys);
  });
}

SparseModelFile load_sparse_model(const std::filesystem::path& path) {
  Reader in(path);
  in.expect_magic(kSparseMagic);
  SparseModelFile file;
  SparseModel& m = file.model;
  SparsityPattern& a = m.pattern;
  const auto n = in.get<std::uint64_t>();
  const auto nnz = in.get<std::uint64_t>();
  m.lambda = in.get<double>();
  a.n = static_cast<std::size_t>(n);
  a.threshold = in.get<double>();
  a.n_max = static_cast<std::size_t>(in.get<std::uint64_t>());
  const auto source = in.get<std::uint32_t>();
  if (source > static_cast<std::uint32_t>(PatternSource::gram_count)) {
    throw DataError(path.string() + ": unknown pattern source");
  }
  a.source = static_cast<PatternSource>(source);

  in.need((n + 1) * 8 + nnz * 12);
  a.col_ptr.resize(static_cast<std::size_t>(n + 1));
  for (auto& p : a.col_ptr) p = static_cast<std::size_t>(in.get<std::uint64_t>());
  a.row_idx.resize(static_cast<std::size_t>(nnz));
  for (auto& r : a.row_idx) {
    r = static_cast<ItemId>(in.get<std::uint32_t>());
    if (static_cast<std::uint64_t>(r) >= n) throw DataError(path.string() + ": row index out of range");
  }
  if (a.col_ptr.front() != 0 || a.col_ptr.back() != nnz) {
    throw DataError(path.string() + ": inconsistent column pointers");
  }
  for (std::size_t j = 0; j < a.n; ++j) {
    if (a.col_ptr[j] > a.col_ptr[j + 1]) throw DataError(path.string() + ": inconsistent column pointers");
  }
  m.values.resize(static_cast<std::size_t>(nnz));
  in.get_array(m.values.data(), nnz);
  file.item_keys = in.keys(n);
  in.expect_end();
  return file;
}

ModelFileKind peek_model_kind(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (in && magic == kDenseMagic) return ModelFileKind::dense;
  if (in && magic == kSparseMagic) return ModelFileKind::sparse;
  throw DataError(path.string() + ": not a model file");
}

void write_item_weights(const std::filesystem::path& path, const ItemWeightVector& weights,
                        const std::vector<std::string>& item_keys) {
  check_key_count(item_keys, weights.w.size());
  atomic_write(path, [&](std::ostream& out) {
    out.precision(17);
    out << "# kind=" << to_string(weights.kind) << " alpha=" << weights.alpha << '\n';
    out << "item,weight\n";
    for (std::size_t i = 0; i < item_keys.size(); ++i) {
      out << item_keys[i] << ',' << weights.w[static_cast<Eigen::Index>(i)] << '\n';
    }
  });
}

ItemWeightVector read_item_weights(const std::filesystem::path& path, const KeyIndex& items) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  ItemWeightVector out;
  out.w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(items.size()), -1.0);
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      // Optional provenance: "# kind=<name> alpha=<value>".
      std::istringstream meta(line.substr(1));
      std::string field;
      while (meta >> field) {
        if (field.rfind("kind=", 0) == 0) {
          const auto name = field.substr(5);
          for (auto k : {WeightKind::uniform, WeightKind::inverse_pop, WeightKind::time_adjusted}) {
            if (to_string(k) == name) out.kind = k;
          }
        } else if (field.rfind("alpha=", 0) == 0) {
          try {
            out.alpha = std::stod(field.substr(6));
          } catch (const std::exception&) {
            throw DataError(path.string() + " line " + std::to_string(line_no) + ": bad alpha");
          }
        }
      }
      continue;
    }
    if (header) {
      header = false;
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": expected item,weight");
    }
    const auto id = items.find(std::string_view(line).substr(0, comma));
    if (!id) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": unknown item '" +
                      line.substr(0, comma) + "'");
    }
    double w = 0.0;
    try {
      w = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": bad weight");
    }
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": weight must be positive");
    }
    out.w[*id] = w;
  }
  for (Eigen::Index i = 0; i < out.w.size(); ++i) {
    if (out.w[i] < 0.0) throw DataError(path.string() + ": no weight for item '" + items.key(static_cast<std::int32_t>(i)) + "'");
  }
  return out;
}

void write_popularity(const std::filesystem::path& path, const PopularityVector& pop,
                      const std::vector<std::string>& item_keys) {
  check_key_count(item_keys, pop.counts.size());
  atomic_write(path, [&](std::ostream& out) {
    out.precision(17);
    out << "item,popularity\n";
    for (std::size_t i = 0; i < item_keys.size(); ++i) {
      out << item_keys[i] << ',' << pop.counts[static_cast<Eigen::Index>(i)] << '\n';
    }
  });
}

}  // namespace linrec
