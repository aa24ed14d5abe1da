#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kz/batch.hpp"
#include "kz/circuit.hpp"
#include "kz/model.hpp"

namespace kz {

// Matrix-product state in mixed-canonical form: sites left of the
// orthogonality center are left-isometric, sites right of it right-isometric.
// Two-site gates contract the center bond, apply the 4x4 unitary, and split
// by SVD, truncating at a relative discarded weight of trunc_tol (the kept
// spectrum is rescaled so the norm is preserved).  Single-site gates act in
// place.  The orthogonality center is moved by exact QR/LQ sweeps, so the
// zig-zag bond order emitted by the circuit builder costs O(1) moves per
// gate.
class MPSState {
  public:
    struct Options {
        // Relative Schmidt *weight* discarded per SVD; one truncation adds
        // ~sqrt(trunc_tol) of 2-norm error to the state, so 1e-12 keeps
        // amplitudes good to ~1e-6 -- far below shot noise.  Use ~1e-24 for
        // numerically exact comparisons against a dense backend.
        double trunc_tol = 1e-12;
        long max_bond = 0;        // hard cap on bond dimension; 0 = none
        std::size_t mem_budget = std::size_t{2} << 30;
        // refuse to continue when a single SVD would discard more than this
        // relative weight (only reachable with a max_bond cap)
        double discard_fail = 1e-2;
    };

    static MPSState product_zero(int n_qubits, const Options& opt);
    static MPSState product_zero(int n_qubits) { return product_zero(n_qubits, Options()); }

    int n_qubits() const { return static_cast<int>(sites_.size()); }
    int orthogonality_center() const { return center_; }
    int max_bond_dimension() const;          // current largest bond
    int max_bond_reached() const { return max_bond_seen_; }
    double discarded_weight() const { return discarded_total_; }
    double norm() const;
    // worst deviation from the expected isometry conditions (tests/debugging)
    double canonical_residual() const;

    void apply(const GateOp& g);
    void evolve_circuit(const Circuit& c);

    // <prod_{q in S} P_q> for P = 'X' or 'Z'; S must be sorted ascending.
    // Moves the orthogonality center (physically a no-op).
    double site_product_expectation(std::span<const std::uint32_t> support, char op);
    // Exact moment via the bond-term expansion; `diagonal` as in StateVector.
    double expect_moment(const MomentExpansion& e, bool diagonal = true);

    // Draw computational-basis samples by sequential conditional sampling,
    // O(N chi^2) per shot, from a right-canonicalized copy.  basis:
    //   0  : read the state as evolved (batch labeled with the basis the
    //        last evolved circuit declared)
    //   'X': X-basis outcomes; applies Hadamards to the copy unless the
    //        evolved circuit already ended in its measurement rotation
    //   'Z': computational readout of the state as-is, labeled 'Z'
    BitstringBatch sample(std::uint64_t shots, std::uint64_t seed, char basis = 0) const;

    // Binary checkpoint: version tag, per-site shape headers, interleaved
    // little-endian doubles.
    void save(const std::string& path) const;
    static MPSState load(const std::string& path, const Options& opt);
    static MPSState load(const std::string& path) { return load(path, Options()); }

    // Contract to a dense statevector (tests/debugging; N <= 20).
    std::vector<std::complex<double>> to_dense() const;

  private:
    struct Site {
        Eigen::MatrixXcd m[2]; // Dl x Dr per physical index
        long dl() const { return m[0].rows(); }
        long dr() const { return m[0].cols(); }
    };

    MPSState() = default;
    void shift_right();
    void shift_left();
    void move_center(int target);
    void apply_single(int q, const Eigen::Matrix2cd& u);
    void apply_bond(int b, const Eigen::Matrix4cd& u, bool keep_right);
    void check_memory() const;

    std::vector<Site> sites_;
    int center_ = 0;
    char basis_label_ = 'Z';
    Options opt_;
    double discarded_total_ = 0.0;
    int max_bond_seen_ = 1;
};

} // namespace kz
