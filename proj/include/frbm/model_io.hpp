#pragma once

// Single-file model container.
//
//   "FRBM"                       4 bytes
//   version                      u32 (currently 1)
//   metadata length              u64, then that many bytes of "key=value\n" lines
//   section count                u32
//   per section: name length u32, name bytes, rows u64, cols u64,
//                rows·cols f64 in column-major order
//   checksum                     u64 FNV-1a over every preceding byte
//
// All integers and floats are little-endian.

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "frbm/certify.hpp"
#include "frbm/eim.hpp"
#include "frbm/error.hpp"
#include "frbm/rbm.hpp"
#include "frbm/rhs.hpp"

namespace frbm {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Section {
  std::string name;
  Eigen::MatrixXd data;
};

struct Container {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Section> sections;

  void set(const std::string& key, const std::string& value) {
    for (auto& kv : metadata) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    metadata.emplace_back(key, value);
  }
  std::optional<std::string> get(const std::string& key) const {
    for (const auto& kv : metadata)
      if (kv.first == key) return kv.second;
    return std::nullopt;
  }
  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v) throw IoError("model file: missing metadata key '" + key + "'");
    return *v;
  }
  void add(std::string name, Eigen::MatrixXd data) { sections.push_back({std::move(name), std::move(data)}); }
  const Section* find(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
  const Eigen::MatrixXd& section(const std::string& name) const {
    const Section* s = find(name);
    if (!s) throw IoError("model file: missing section '" + name + "'");
    return s->data;
  }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const std::string& what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string take(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  double f64(const std::string& what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& what) const {
    if (bytes_.size() - pos_ < n) throw IoError("model file truncated in " + what);
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_container(const Container& c) {
  std::string out = "FRBM";
  detail::put_le<std::uint32_t>(out, kContainerVersion);
  std::string meta;
  for (const auto& [k, v] : c.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw IoError("model file: metadata entry '" + k + "' contains '=' or a newline");
    }
    meta += k + "=" + v + "\n";
  }
  detail::put_le<std::uint64_t>(out, meta.size());
  out += meta;
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.sections.size()));
  for (const auto& s : c.sections) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out += s.name;
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(s.data.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(s.data.cols()));
    for (Eigen::Index i = 0; i < s.data.size(); ++i) detail::put_f64(out, s.data.data()[i]);
  }
  detail::put_le<std::uint64_t>(out, detail::fnv1a(out));
  return out;
}

inline Container decode_container(const std::string& bytes) {
  detail::Reader r(bytes);
  if (r.take(4, "magic bytes") != "FRBM") throw IoError("model file: bad magic bytes (not an FRBM container)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw IoError("model file: unsupported format version " + std::to_string(version) + " (expected " +
                  std::to_string(kContainerVersion) + ")");
  }
  Container c;
  const auto meta_len = r.get<std::uint64_t>("metadata length");
  if (meta_len > r.remaining()) throw IoError("model file truncated in metadata section");
  const std::string meta = r.take(static_cast<std::size_t>(meta_len), "metadata section");
  std::size_t start = 0;
  while (start < meta.size()) {
    const std::size_t end = meta.find('\n', start);
    if (end == std::string::npos) throw IoError("model file: unterminated metadata line");
    const std::string line = meta.substr(start, end - start);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw IoError("model file: metadata line without '=': " + line);
    c.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    start = end + 1;
  }
  const auto count = r.get<std::uint32_t>("section count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string label = "header of section #" + std::to_string(i);
    const auto name_len = r.get<std::uint32_t>(label);
    Section s;
    s.name = r.take(name_len, label);
    const std::string where = "section '" + s.name + "'";
    const auto rows = r.get<std::uint64_t>(where);
    const auto cols = r.get<std::uint64_t>(where);
    if (cols != 0 && rows > r.remaining() / 8 / cols) throw IoError("model file truncated in " + where);
    s.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < s.data.size(); ++k) s.data.data()[k] = r.f64(where);
    c.sections.push_back(std::move(s));
  }
  const std::size_t payload_end = r.pos();
  const auto stored = r.get<std::uint64_t>("trailing checksum");
  if (stored != detail::fnv1a(bytes.substr(0, payload_end))) throw IoError("model file: checksum mismatch");
  if (r.remaining() != 0) throw IoError("model file: trailing bytes after checksum");
  return c;
}

inline void write_container(const Container& c, const std::string& path) {
  const std::string bytes = encode_container(c);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

inline Container read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

// ------------------------------------------------------------ model codecs

namespace detail {

inline Eigen::MatrixXd column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
inline std::vector<double> to_vector(const Eigen::MatrixXd& m) { return {m.data(), m.data() + m.size()}; }

inline Eigen::MatrixXd rows_of(const std::vector<std::vector<double>>& rows, std::size_t width) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw IoError("model file: ragged table");
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}
inline std::vector<std::vector<double>> table_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

inline Eigen::MatrixXd terms_table(const std::vector<ElementTerms>& t) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.size()), 5);
  for (std::size_t e = 0; e < t.size(); ++e) m.row(static_cast<Eigen::Index>(e)) << t[e].P, t[e].R, t[e].Qm, t[e].s, t[e].m00;
  return m;
}
inline std::vector<ElementTerms> terms_from(const Eigen::MatrixXd& m, Eigen::Index first, Eigen::Index count) {
  if (m.cols() != 5 || first + count > m.rows()) throw IoError("model file: malformed element terms");
  std::vector<ElementTerms> out;
  for (Eigen::Index e = first; e < first + count; ++e) out.push_back({m(e, 0), m(e, 1), m(e, 2), m(e, 3), m(e, 4)});
  return out;
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw IoError("model file: metadata '" + key + "' is not an integer: " + v);
  }
}

}  // namespace detail

inline void encode_eim(Container& c, const EIMModel& m) {
  c.set("eim.subdomain", to_string(m.subdomain));
  c.add("eim.s_snapshots", detail::column(m.s_snapshots));
  c.add("eim.magic_points", detail::column(m.magic_points));
  std::vector<double> idx(m.magic_indices.begin(), m.magic_indices.end());
  c.add("eim.magic_indices", detail::column(idx));
  c.add("eim.interp_matrix", m.interp_matrix);
  c.add("eim.raw_matrix", m.raw_matrix);
  c.add("eim.y_grid", detail::column(m.y_grid));
  c.add("eim.s_grid", detail::column(m.s_grid));
  c.add("eim.error_history", detail::column(m.error_history));
}

inline EIMModel decode_eim(const Container& c) {
  EIMModel m;
  m.subdomain = subdomain_from_string(c.require("eim.subdomain"));
  m.s_snapshots = detail::to_vector(c.section("eim.s_snapshots"));
  m.magic_points = detail::to_vector(c.section("eim.magic_points"));
  for (double v : detail::to_vector(c.section("eim.magic_indices"))) m.magic_indices.push_back(static_cast<std::size_t>(v));
  m.interp_matrix = c.section("eim.interp_matrix");
  m.raw_matrix = c.section("eim.raw_matrix");
  m.y_grid = detail::to_vector(c.section("eim.y_grid"));
  m.s_grid = detail::to_vector(c.section("eim.s_grid"));
  m.error_history = detail::to_vector(c.section("eim.error_history"));
  const auto Q = static_cast<Eigen::Index>(m.s_snapshots.size());
  if (m.raw_matrix.rows() != Q || m.raw_matrix.cols() != Q || m.magic_points.size() != m.s_snapshots.size()) {
    throw IoError("model file: inconsistent EIM section sizes");
  }
  m.prepare();
  return m;
}

/// Reduced model sections; the EIM model travels with it.
inline void encode_reduced(Container& c, const ReducedModel& m) {
  encode_eim(c, m.eim);
  c.set("rb.subdomain", to_string(m.subdomain));
  c.set("rb.rhs", to_string(m.rhs.kind));
  c.set("rb.N", std::to_string(m.size()));
  c.set("rb.Q", std::to_string(m.reduced_ops.size()));
  c.set("rb.P", std::to_string(m.reduced_loads.size()));
  c.set("rb.riesz.num_loads", std::to_string(m.riesz.num_loads));
  c.set("rb.riesz.num_components", std::to_string(m.riesz.num_components));
  c.set("rb.riesz.num_basis", std::to_string(m.riesz.num_basis));
  Eigen::MatrixXd modes(static_cast<Eigen::Index>(m.rhs.modes.size()), 3);
  for (std::size_t i = 0; i < m.rhs.modes.size(); ++i)
    modes.row(static_cast<Eigen::Index>(i)) << m.rhs.modes[i].j, m.rhs.modes[i].k, m.rhs.modes[i].coeff;
  c.add("rb.rhs_modes", modes);
  Eigen::MatrixXd mu(static_cast<Eigen::Index>(m.size()), 2);
  for (std::size_t n = 0; n < m.size(); ++n) mu.row(static_cast<Eigen::Index>(n)) << m.mu_snapshots[n].s, m.mu_snapshots[n].nu;
  c.add("rb.mu_snapshots", mu);
  c.add("rb.basis", m.basis);
  c.add("rb.R", m.R);
  for (std::size_t q = 0; q < m.reduced_ops.size(); ++q) c.add("rb.op." + std::to_string(q), m.reduced_ops[q]);
  for (std::size_t p = 0; p < m.reduced_loads.size(); ++p) c.add("rb.load." + std::to_string(p), m.reduced_loads[p]);
  c.add("rb.trace_snapshots", m.trace_snapshots);
  c.add("rb.trace_gram", m.trace_gram);
  c.add("rb.riesz.R", m.riesz.R);
}

inline ReducedModel decode_reduced(const Container& c) {
  ReducedModel m;
  m.eim = decode_eim(c);
  m.subdomain = subdomain_from_string(c.require("rb.subdomain"));
  m.rhs.kind = rhs_kind_from_string(c.require("rb.rhs"));
  const Eigen::MatrixXd& modes = c.section("rb.rhs_modes");
  for (Eigen::Index i = 0; i < modes.rows(); ++i)
    m.rhs.modes.push_back({static_cast<int>(modes(i, 0)), static_cast<int>(modes(i, 1)), modes(i, 2)});
  const Eigen::MatrixXd& mu = c.section("rb.mu_snapshots");
  for (Eigen::Index n = 0; n < mu.rows(); ++n) m.mu_snapshots.push_back({mu(n, 0), mu(n, 1)});
  const std::size_t N = detail::to_size("rb.N", c.require("rb.N"));
  const std::size_t Q = detail::to_size("rb.Q", c.require("rb.Q"));
  const std::size_t P = detail::to_size("rb.P", c.require("rb.P"));
  if (N != m.mu_snapshots.size()) throw IoError("model file: rb.N disagrees with section 'rb.mu_snapshots'");
  m.basis = c.section("rb.basis");
  m.R = c.section("rb.R");
  for (std::size_t q = 0; q < Q; ++q) m.reduced_ops.push_back(c.section("rb.op." + std::to_string(q)));
  for (std::size_t p = 0; p < P; ++p) m.reduced_loads.push_back(c.section("rb.load." + std::to_string(p)));
  m.trace_snapshots = c.section("rb.trace_snapshots");
  m.trace_gram = c.section("rb.trace_gram");
  m.riesz.R = c.section("rb.riesz.R");
  m.riesz.num_loads = detail::to_size("rb.riesz.num_loads", c.require("rb.riesz.num_loads"));
  m.riesz.num_components = detail::to_size("rb.riesz.num_components", c.require("rb.riesz.num_components"));
  m.riesz.num_basis = detail::to_size("rb.riesz.num_basis", c.require("rb.riesz.num_basis"));
  const auto n = static_cast<Eigen::Index>(N);
  if (m.R.rows() != n || m.trace_gram.rows() != n || m.trace_snapshots.cols() != n || m.eim.size() != Q) {
    throw IoError("model file: inconsistent reduced model section sizes");
  }
  return m;
}

inline void encode_scm(Container& c, const SCMModel& m) {
  const std::size_t Q = m.num_components();
  c.set("scm.subdomain", to_string(m.subdomain));
  c.set("scm.Q", std::to_string(Q));
  c.set("scm.K", std::to_string(m.num_constraints()));
  c.add("scm.sigma_min", detail::column(m.sigma_min));
  c.add("scm.sigma_max", detail::column(m.sigma_max));
  c.add("scm.constraint_s", detail::column(m.constraint_s));
  c.add("scm.constraint_theta", detail::rows_of(m.constraint_theta, Q));
  c.add("scm.constraint_beta", detail::column(m.constraint_beta));
  std::vector<double> modes;
  std::vector<std::vector<double>> yv;
  std::vector<std::vector<double>> quot;
  for (const auto& rd : m.rayleigh) {
    modes.push_back(rd.mode);
    yv.push_back(rd.y_vector);
    quot.push_back(rd.component_quotients);
  }
  c.add("scm.rayleigh_mode", detail::column(modes));
  c.add("scm.rayleigh_y", detail::rows_of(yv, yv.empty() ? 0 : yv.front().size()));
  c.add("scm.rayleigh_quotients", detail::rows_of(quot, Q));
  Eigen::MatrixXd lam(2, 1);
  lam << m.lambda_min, m.lambda_max;
  c.add("scm.lambda_range", lam);
  std::vector<ElementTerms> all;
  for (const auto& t : m.component_terms) all.insert(all.end(), t.begin(), t.end());
  c.add("scm.component_terms", detail::terms_table(all));
  c.add("scm.reference_terms", detail::terms_table(m.reference_terms));
}

inline SCMModel decode_scm(const Container& c) {
  SCMModel m;
  m.subdomain = subdomain_from_string(c.require("scm.subdomain"));
  const std::size_t Q = detail::to_size("scm.Q", c.require("scm.Q"));
  const std::size_t K = detail::to_size("scm.K", c.require("scm.K"));
  m.sigma_min = detail::to_vector(c.section("scm.sigma_min"));
  m.sigma_max = detail::to_vector(c.section("scm.sigma_max"));
  m.constraint_s = detail::to_vector(c.section("scm.constraint_s"));
  m.constraint_theta = detail::table_rows(c.section("scm.constraint_theta"));
  m.constraint_beta = detail::to_vector(c.section("scm.constraint_beta"));
  const auto modes = detail::to_vector(c.section("scm.rayleigh_mode"));
  const auto yv = detail::table_rows(c.section("scm.rayleigh_y"));
  const auto quot = detail::table_rows(c.section("scm.rayleigh_quotients"));
  if (m.sigma_min.size() != Q || m.constraint_s.size() != K || modes.size() != K || yv.size() != K || quot.size() != K) {
    throw IoError("model file: inconsistent SCM section sizes");
  }
  for (std::size_t k = 0; k < K; ++k) m.rayleigh.push_back({static_cast<int>(modes[k]), yv[k], quot[k]});
  const Eigen::MatrixXd& lam = c.section("scm.lambda_range");
  if (lam.size() != 2) throw IoError("model file: malformed section 'scm.lambda_range'");
  m.lambda_min = lam(0);
  m.lambda_max = lam(1);
  const Eigen::MatrixXd& ref = c.section("scm.reference_terms");
  m.reference_terms = detail::terms_from(ref, 0, ref.rows());
  const Eigen::MatrixXd& comp = c.section("scm.component_terms");
  if (comp.rows() != static_cast<Eigen::Index>(Q) * ref.rows()) throw IoError("model file: malformed section 'scm.component_terms'");
  for (std::size_t q = 0; q < Q; ++q) m.component_terms.push_back(detail::terms_from(comp, static_cast<Eigen::Index>(q) * ref.rows(), ref.rows()));
  return m;
}

/// What a model file holds. A reduced model implies its EIM model.
struct ModelBundle {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::optional<EIMModel> eim;
  std::optional<ReducedModel> reduced;
  std::optional<SCMModel> scm;

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& kv : metadata)
      if (kv.first == key) return kv.second;
    return std::nullopt;
  }
};

inline Container encode_bundle(const ModelBundle& b) {
  Container c;
  c.metadata = b.metadata;
  if (b.reduced) {
    encode_reduced(c, *b.reduced);
  } else if (b.eim) {
    encode_eim(c, *b.eim);
  }
  if (b.scm) encode_scm(c, *b.scm);
  c.set("contents", std::string(b.eim || b.reduced ? "eim" : "") + (b.reduced ? ",reduced" : "") + (b.scm ? ",scm" : ""));
  return c;
}

inline ModelBundle decode_bundle(const Container& c) {
  ModelBundle b;
  const std::string contents = c.get("contents").value_or("");
  auto has = [&](const std::string& part) {
    std::size_t start = 0;
    while (start <= contents.size()) {
      const std::size_t end = std::min(contents.find(',', start), contents.size());
      if (contents.substr(start, end - start) == part) return true;
      start = end + 1;
    }
    return false;
  };
  for (const auto& kv : c.metadata) {
    if (kv.first.rfind("eim.", 0) != 0 && kv.first.rfind("rb.", 0) != 0 && kv.first.rfind("scm.", 0) != 0 &&
        kv.first != "contents") {
      b.metadata.push_back(kv);
    }
  }
  if (has("reduced")) {
    b.reduced = decode_reduced(c);
    b.eim = b.reduced->eim;
  } else if (has("eim")) {
    b.eim = decode_eim(c);
  }
  if (has("scm")) b.scm = decode_scm(c);
  return b;
}

inline void save_bundle(const ModelBundle& b, const std::string& path) { write_container(encode_bundle(b), path); }

inline ModelBundle load_bundle(const std::string& path) {
  const Container c = read_container(path);
  try {
    return decode_bundle(c);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace frbm
