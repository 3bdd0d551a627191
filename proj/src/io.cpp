#include "psdsense/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace psdsense {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

static_assert(std::endian::native == std::endian::little,
              "matrix payloads are written as little-endian float64");

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

json wishart_config(const MapProvenance& p) {
  return {{"p", p.p},
          {"sigma2", p.sigma2},
          {"method", p.wishart_method == WishartMethod::direct ? "direct" : "bartlett"}};
}

}  // namespace

std::string base64_encode(const std::vector<double>& xs) {
  std::string bytes(xs.size() * sizeof(double), '\0');
  if (!xs.empty()) std::memcpy(bytes.data(), xs.data(), bytes.size());
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t(std::uint8_t(bytes[i])) << 16) |
                            (std::uint32_t(std::uint8_t(bytes[i + 1])) << 8) |
                            std::uint32_t(std::uint8_t(bytes[i + 2]));
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = std::uint32_t(std::uint8_t(bytes[i])) << 16;
    if (rest == 2) v |= std::uint32_t(std::uint8_t(bytes[i + 1])) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<double> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw InvalidArgument("base64: length is not a multiple of 4");
  std::string bytes;
  bytes.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> d{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        d[k] = 0;
        ++pad;
      } else if (pad > 0 || (d[k] = decode_char(c)) < 0) {
        throw InvalidArgument("base64: invalid character");
      }
    }
    const std::uint32_t v = (std::uint32_t(d[0]) << 18) | (std::uint32_t(d[1]) << 12) |
                            (std::uint32_t(d[2]) << 6) | std::uint32_t(d[3]);
    bytes += char((v >> 16) & 0xFF);
    if (pad < 2) bytes += char((v >> 8) & 0xFF);
    if (pad < 1) bytes += char(v & 0xFF);
  }
  if (bytes.size() % sizeof(double) != 0) {
    throw InvalidArgument("base64: payload is not a whole number of float64 values");
  }
  std::vector<double> xs(bytes.size() / sizeof(double));
  if (!xs.empty()) std::memcpy(xs.data(), bytes.data(), bytes.size());
  return xs;
}

template <typename Scalar>
std::string encode_matrix(const Mat<Scalar>& a) {
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(a.size()) * (is_complex_v<Scalar> ? 2 : 1));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if constexpr (is_complex_v<Scalar>) {
        xs.push_back(a(i, j).real());
        xs.push_back(a(i, j).imag());
      } else {
        xs.push_back(a(i, j));
      }
    }
  }
  return base64_encode(xs);
}

template <typename Scalar>
Mat<Scalar> decode_matrix(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
  const auto xs = base64_decode(text);
  const std::size_t width = is_complex_v<Scalar> ? 2 : 1;
  if (xs.size() != static_cast<std::size_t>(rows * cols) * width) {
    throw InvalidArgument("decode_matrix: payload holds " + std::to_string(xs.size()) +
                          " values, expected " + std::to_string(rows * cols * width));
  }
  Mat<Scalar> a(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if constexpr (is_complex_v<Scalar>) {
        a(i, j) = Scalar(xs[k], xs[k + 1]);
        k += 2;
      } else {
        a(i, j) = xs[k++];
      }
    }
  }
  return a;
}

template <typename Scalar>
json map_to_json(const SensingMap<Scalar>& map, bool include_matrices) {
  const auto& p = map.provenance();
  json j;
  j["family"] = to_string(p.family);
  j["n"] = map.n();
  j["m"] = map.m();
  j["field"] = to_string(map.field());
  j["seed"] = p.seed;
  switch (p.family) {
    case Family::wishart: j["config"] = wishart_config(p); break;
    case Family::pauli:
      j["config"] = {{"q", p.q}, {"sign_rule", p.sign_rule == SignRule::plus ? "plus" : "random"}};
      break;
    default: j["config"] = json::object(); break;
  }
  if (!map.labels.empty()) j["labels"] = map.labels;
  if (!map.warnings.empty()) j["warnings"] = map.warnings;
  if (include_matrices || p.family == Family::custom) {
    json mats = json::array();
    for (const auto& a : map.matrices()) mats.push_back(encode_matrix<Scalar>(a.matrix()));
    j["matrices"] = std::move(mats);
  }
  return j;
}

template <typename Scalar>
SensingMap<Scalar> map_from_json(const json& j) {
  const Field field = parse_field(j.at("field").get<std::string>());
  if (field != field_of_v<Scalar>) {
    throw InvalidArgument(std::string("map_from_json: container holds a ") + to_string(field) +
                          " map");
  }
  const auto n = j.at("n").get<Eigen::Index>();
  const auto m = j.at("m").get<Eigen::Index>();
  MapProvenance p;
  p.family = parse_family(j.at("family").get<std::string>());
  p.seed = j.value("seed", std::uint64_t{0});
  const json cfg = j.value("config", json::object());
  if (p.family == Family::wishart) {
    p.p = cfg.at("p").get<Eigen::Index>();
    p.sigma2 = cfg.value("sigma2", 1.0);
    p.wishart_method =
        cfg.value("method", std::string("direct")) == "bartlett" ? WishartMethod::bartlett
                                                                 : WishartMethod::direct;
  } else if (p.family == Family::pauli) {
    p.q = cfg.at("q").get<int>();
    p.sign_rule = cfg.value("sign_rule", std::string("random")) == "plus" ? SignRule::plus
                                                                          : SignRule::random;
  }
  if (!j.contains("matrices")) return regenerate<Scalar>(p, n, m);

  const auto& mats = j.at("matrices");
  if (static_cast<Eigen::Index>(mats.size()) != m) {
    throw InvalidArgument("map_from_json: matrices list has " + std::to_string(mats.size()) +
                          " entries, expected m=" + std::to_string(m));
  }
  std::vector<Hermitian<Scalar>> list;
  list.reserve(mats.size());
  for (const auto& t : mats) list.emplace_back(decode_matrix<Scalar>(t.get<std::string>(), n, n));
  SensingMap<Scalar> map(std::move(list), p);
  if (j.contains("labels")) map.labels = j.at("labels").get<std::vector<std::string>>();
  return map;
}

template <typename Scalar>
json truth_to_json(const GroundTruth<Scalar>& truth) {
  return {{"n", truth.x_star.dim()},
          {"r", truth.r},
          {"field", to_string(field_of_v<Scalar>)},
          {"normalized", truth.normalized},
          {"seed", truth.seed},
          {"x_star", encode_matrix<Scalar>(truth.x_star.matrix())}};
}

template <typename Scalar>
GroundTruth<Scalar> truth_from_json(const json& j) {
  const auto n = j.at("n").get<Eigen::Index>();
  GroundTruth<Scalar> t;
  t.r = j.at("r").get<Eigen::Index>();
  t.normalized = j.value("normalized", false);
  t.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("x_star")) {
    t.x_star = Hermitian<Scalar>(decode_matrix<Scalar>(j.at("x_star").get<std::string>(), n, n));
  } else {
    t = gen_ground_truth<Scalar>(n, t.r, t.normalized, t.seed);
  }
  return t;
}

template <typename Scalar>
json whitened_to_json(const WhitenedProblem<Scalar>& wp, Eigen::Index n, bool include_matrices) {
  json j;
  j["family"] = to_string(wp.source.family);
  j["n"] = n;
  j["m"] = wp.phi.size();
  j["field"] = to_string(field_of_v<Scalar>);
  j["seed"] = wp.source.seed;
  j["phi"] = std::vector<double>(wp.phi.data(), wp.phi.data() + wp.phi.size());
  j["b"] = std::vector<double>(wp.b.data(), wp.b.data() + wp.b.size());
  j["c"] = wp.c;
  j["B"] = encode_matrix<Scalar>(wp.B.matrix());
  j["V"] = encode_matrix<Scalar>(wp.V);
  if (include_matrices) {
    json mats = json::array();
    for (const auto& a : wp.M) mats.push_back(encode_matrix<Scalar>(a.matrix()));
    j["matrices"] = std::move(mats);
  }
  return j;
}

template <typename Scalar>
json report_to_json(const SolverReport<Scalar>& report, bool include_estimate) {
  json j;
  j["solver"] = report.solver;
  j["iters"] = report.iters;
  j["converged"] = report.converged;
  j["final_residual"] = report.final_residual();
  j["objective_value"] = report.objective_value;
  j["wall_ms"] = report.wall_ms;
  j["descent_violations"] = report.descent_violations;
  if (report.dist_full >= 0.0) {
    j["dist_full"] = report.dist_full;
    j["dist_rank1"] = report.dist_rank1;
  }
  j["notes"] = report.notes;
  j["resid_history_length"] = report.resid_history.size();
  if (include_estimate) {
    j["n"] = report.x_hat.dim();
    j["x_hat"] = encode_matrix<Scalar>(report.x_hat.matrix());
  }
  return j;
}

json rip_to_json(const RipEstimate& est) {
  return {{"r", est.r},
          {"samples", est.samples},
          {"alpha", est.alpha},
          {"delta_hat", est.delta_hat},
          {"ratio_min", est.ratio_min},
          {"ratio_median", est.ratio_median},
          {"ratio_max", est.ratio_max},
          {"note", RipEstimate::bound_note}};
}

json corollary_to_json(const CorollaryReport& rep) {
  json j = {{"r", rep.r},
            {"gamma", rep.gamma},
            {"alpha", rep.alpha},
            {"delta_gamma_r", rep.delta_gamma_r},
            {"delta_2r", rep.delta_2r},
            {"slack", rep.slack},
            {"holds", rep.holds}};
  if (!rep.warning.empty()) j["warning"] = rep.warning;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resid_csv(const std::vector<Real>& history) {
  std::string out = "iter,residual\n";
  char buf[64];
  for (std::size_t k = 0; k < history.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, history[k]);
    out += buf;
  }
  return out;
}

std::string ratios_csv(const std::vector<Real>& ratios) {
  std::string out = "k,ratio\n";
  char buf[64];
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, ratios[k]);
    out += buf;
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

#define PSDSENSE_INSTANTIATE_IO(S)                                                      \
  template std::string encode_matrix(const Mat<S>&);                                    \
  template Mat<S> decode_matrix<S>(const std::string&, Eigen::Index, Eigen::Index);     \
  template json map_to_json(const SensingMap<S>&, bool);                                \
  template SensingMap<S> map_from_json<S>(const json&);                                 \
  template json truth_to_json(const GroundTruth<S>&);                                   \
  template GroundTruth<S> truth_from_json<S>(const json&);                              \
  template json whitened_to_json(const WhitenedProblem<S>&, Eigen::Index, bool);        \
  template json report_to_json(const SolverReport<S>&, bool);

PSDSENSE_INSTANTIATE_IO(Real)
PSDSENSE_INSTANTIATE_IO(Complex)

}  // namespace psdsense
