// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "error.hpp"
#include "linalg.hpp"
#include "port_model.hpp"
#include "rng.hpp"

namespace beamspace {

enum class Pas { uniform_2d_azimuth, uniform_3d_sphere };

inline Pas parse_pas(const std::string& s) {
    if (s == "2d" || s == "uniform-2d-azimuth") return Pas::uniform_2d_azimuth;
    if (s == "3d" || s == "uniform-3d-sphere") return Pas::uniform_3d_sphere;
    throw ValidationError("unknown PAS '" + s + "'", "pas");
}

struct ChannelSpec {
    int M = 1;  // receive antennas (ideally isolated)
    Pas pas = Pas::uniform_3d_sphere;
    std::uint64_t rng_seed = 1;
    int trials = 500;

    void validate() const {
        detail::require(M >= 1, "M must be at least 1", "M");
        detail::require(trials >= 1, "trials must be at least 1", "trials");
    }
};

struct ChannelRealization {
    MatrixXc H_iid;  // M x N
    int trial_index = 0;
    std::uint64_t seed_state = 0;  // stream identifier the draw came from
};

// Generator for trial `trial` of sub-stream `stream`; depends on nothing else.
inline CounterRng trial_rng(std::uint64_t seed, std::uint64_t stream, int trial) {
    return CounterRng(seed, stream_id(stream, static_cast<std::uint64_t>(trial)));
}

inline MatrixXc complex_gaussian(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
    MatrixXc m(rows, cols);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.complex_normal();
    return m;
}

// Beamspace channel between an ideal M-antenna receiver and the N orthonormal
// transmit patterns: i.i.d. CN(0, 1) entries, drawn directly.
inline ChannelRealization draw_h_iid(const ChannelSpec& spec, const ModalBasis& basis, int trial, std::uint64_t stream = 0) {
    spec.validate();
    detail::require(spec.M >= basis.usable_rank, "M must be at least the usable rank of the transmit basis", "M");
    auto rng = trial_rng(spec.rng_seed, stream, trial);
    ChannelRealization out;
    out.H_iid = complex_gaussian(spec.M, basis.size(), rng);
    out.trial_index = trial;
    out.seed_state = stream_id(stream, static_cast<std::uint64_t>(trial));
    return out;
}

// Receive patterns with (1/eta) E_R^H E_R = I: QR of a Gaussian K x M matrix.
inline MatrixXc ideal_receive_patterns(Eigen::Index k, int m, double eta, std::uint64_t seed) {
    detail::require(m <= k, "receiver needs M <= K");
    CounterRng rng(seed, 0xEEEEULL);
    const MatrixXc g = complex_gaussian(k, m, rng);
    const Eigen::HouseholderQR<MatrixXc> qr(g);
    const MatrixXc thin = qr.householderQ() * MatrixXc::Identity(k, m);
    return thin * std::sqrt(eta);
}

// Reference route through the K x K virtual channel: H_iid = (1/eta) E_R^H H_v B_T
// with [H_v]_ij ~ CN(0, 1). Statistically equivalent to draw_h_iid.
inline ChannelRealization draw_h_iid_via_virtual_channel(const ChannelSpec& spec, const ModalBasis& basis, const MatrixXc& receive_patterns,
                                                         int trial, std::uint64_t stream = 0) {
    spec.validate();
    detail::require(basis.B.size() > 0, "basis has no pattern matrix B");
    detail::require(receive_patterns.rows() == basis.B.rows() && receive_patterns.cols() == spec.M, "receive patterns must be K x M");
    auto rng = trial_rng(spec.rng_seed, stream ^ 0x5A5A5A5AULL, trial);
    const Eigen::Index k = basis.B.rows();
    const MatrixXc h_v = complex_gaussian(k, k, rng);
    ChannelRealization out;
    out.H_iid = receive_patterns.adjoint() * (h_v * basis.B) / basis.eta_ohm;
    out.trial_index = trial;
    out.seed_state = stream_id(stream ^ 0x5A5A5A5AULL, static_cast<std::uint64_t>(trial));
    return out;
}

// H = H_iid Lambda^1/2 Q^H, the channel seen by the N port currents.
inline MatrixXc compose_channel(const MatrixXc& h_iid, const ModalBasis& basis) {
    detail::require(h_iid.cols() == basis.size(), "H_iid has " + std::to_string(h_iid.cols()) + " columns but the basis has " + std::to_string(basis.size()) + " modes");
    const VectorXr root = basis.lambda.cwiseMax(0.0).cwiseSqrt();
    return h_iid * root.cast<cdouble>().asDiagonal() * basis.Q.adjoint();
}

} // namespace beamspace
