#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "psdsense/core.hpp"
#include "psdsense/rip.hpp"
#include "psdsense/sensing.hpp"
#include "psdsense/solvers.hpp"
#include "psdsense/transform.hpp"

namespace psdsense {

using json = nlohmann::ordered_json;

/// Standard base64 (RFC 4648, padded) of the little-endian bytes of xs.
std::string base64_encode(const std::vector<double>& xs);
std::vector<double> base64_decode(const std::string& text);

/// Row-major float64 payload; complex entries are stored as (re, im) pairs.
template <typename Scalar>
std::string encode_matrix(const Mat<Scalar>& a);
template <typename Scalar>
Mat<Scalar> decode_matrix(const std::string& text, Eigen::Index rows, Eigen::Index cols);

/// {family, n, m, field, seed, config, matrices?}. Matrices are written only
/// when asked or when the map cannot be regenerated from its seed.
template <typename Scalar>
json map_to_json(const SensingMap<Scalar>& map, bool include_matrices = false);
template <typename Scalar>
SensingMap<Scalar> map_from_json(const json& j);

template <typename Scalar>
json truth_to_json(const GroundTruth<Scalar>& truth);
template <typename Scalar>
GroundTruth<Scalar> truth_from_json(const json& j);

/// Same container scheme as the sensing map plus phi, c, B and V. The M_i
/// are written only with include_matrices; they follow from (map, phi).
template <typename Scalar>
json whitened_to_json(const WhitenedProblem<Scalar>& wp, Eigen::Index n,
                      bool include_matrices = false);

template <typename Scalar>
json report_to_json(const SolverReport<Scalar>& report, bool include_estimate = true);

json rip_to_json(const RipEstimate& est);
json corollary_to_json(const CorollaryReport& rep);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// iter,residual
std::string resid_csv(const std::vector<Real>& history);
/// k,ratio
std::string ratios_csv(const std::vector<Real>& ratios);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace psdsense
