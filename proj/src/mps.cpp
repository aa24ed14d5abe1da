#include "kz/mps.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

#include "kz/errors.hpp"
#include "kz/rng.hpp"

namespace kz {

namespace {

using Mat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

lapack_complex_double* lp(Mat& m) { return reinterpret_cast<lapack_complex_double*>(m.data()); }

// Thin SVD, divide-and-conquer first, QR-based driver as fallback for the
// rare zgesdd non-convergence.
void thin_svd(const Mat& a, Mat& u, Eigen::VectorXd& s, Mat& vt) {
    const lapack_int m = static_cast<lapack_int>(a.rows());
    const lapack_int n = static_cast<lapack_int>(a.cols());
    const lapack_int k = std::min(m, n);
    u.resize(m, k);
    s.resize(k);
    vt.resize(k, n);
    Mat work = a;
    lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, lp(work), m, s.data(), lp(u), m,
                                     lp(vt), k);
    if (info != 0) {
        work = a;
        std::vector<double> superb(static_cast<std::size_t>(k));
        info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, lp(work), m, s.data(), lp(u), m,
                              lp(vt), k, superb.data());
        if (info != 0)
            throw NumericalError("SVD failed to converge (zgesdd and zgesvd), info=" +
                                 std::to_string(info));
    }
}

// Thin QR; Q gets orthonormal columns, R is upper triangular k x cols.
void thin_qr(const Mat& a, Mat& q, Mat& r) {
    const long k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Mat> qr(a);
    q = qr.householderQ() * Mat::Identity(a.rows(), k);
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

Eigen::Matrix2cd single_qubit_unitary(const GateOp& g) {
    const cplx i(0.0, 1.0);
    Eigen::Matrix2cd u;
    switch (g.kind) {
    case GateKind::PauliX: u << 0, 1, 1, 0; break;
    case GateKind::PauliY: u << 0, -i, i, 0; break;
    case GateKind::PauliZ: u << 1, 0, 0, -1; break;
    case GateKind::FieldRotation:
        u << std::exp(i * g.angle), 0, 0, std::exp(-i * g.angle);
        break;
    default: throw ConfigError("not a single-qubit gate");
    }
    return u;
}

Eigen::Matrix2cd hadamard_unitary() {
    Eigen::Matrix2cd h;
    h << 1, 1, 1, -1;
    return h / std::sqrt(2.0);
}

// exp(i theta XX) in the basis |s_left + 2 s_right>
Eigen::Matrix4cd coupling_unitary(double theta) {
    const cplx c(std::cos(theta), 0.0), is(0.0, std::sin(theta));
    Eigen::Matrix4cd u = Eigen::Matrix4cd::Zero();
    u(0, 0) = u(1, 1) = u(2, 2) = u(3, 3) = c;
    u(0, 3) = u(3, 0) = u(1, 2) = u(2, 1) = is;
    return u;
}

} // namespace

MPSState MPSState::product_zero(int n_qubits, const Options& opt) {
    if (n_qubits < 2) throw ConfigError("mps needs at least 2 qubits");
    MPSState st;
    st.opt_ = opt;
    st.sites_.resize(static_cast<std::size_t>(n_qubits));
    for (auto& s : st.sites_) {
        s.m[0] = Mat::Constant(1, 1, 1.0);
        s.m[1] = Mat::Zero(1, 1);
    }
    st.center_ = 0;
    return st;
}

int MPSState::max_bond_dimension() const {
    long chi = 1;
    for (const auto& s : sites_) chi = std::max(chi, s.dr());
    return static_cast<int>(chi);
}

double MPSState::norm() const {
    const auto& c = sites_[static_cast<std::size_t>(center_)];
    return std::sqrt(c.m[0].squaredNorm() + c.m[1].squaredNorm());
}

double MPSState::canonical_residual() const {
    double worst = 0.0;
    for (int k = 0; k < n_qubits(); ++k) {
        const auto& s = sites_[static_cast<std::size_t>(k)];
        if (k < center_) {
            Mat g = s.m[0].adjoint() * s.m[0] + s.m[1].adjoint() * s.m[1];
            worst = std::max(worst, (g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
        } else if (k > center_) {
            Mat g = s.m[0] * s.m[0].adjoint() + s.m[1] * s.m[1].adjoint();
            worst = std::max(worst, (g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

void MPSState::shift_right() {
    auto& s = sites_[static_cast<std::size_t>(center_)];
    const long dl = s.dl(), dr = s.dr();
    Mat stacked(2 * dl, dr);
    stacked.topRows(dl) = s.m[0];
    stacked.bottomRows(dl) = s.m[1];
    Mat q, r;
    thin_qr(stacked, q, r);
    s.m[0] = q.topRows(dl);
    s.m[1] = q.bottomRows(dl);
    auto& nxt = sites_[static_cast<std::size_t>(center_) + 1];
    nxt.m[0] = r * nxt.m[0];
    nxt.m[1] = r * nxt.m[1];
    ++center_;
}

void MPSState::shift_left() {
    auto& s = sites_[static_cast<std::size_t>(center_)];
    const long dl = s.dl(), dr = s.dr();
    // rows of [m0 | m1] must become orthonormal: QR the adjoint
    Mat stacked(2 * dr, dl);
    stacked.topRows(dr) = s.m[0].adjoint();
    stacked.bottomRows(dr) = s.m[1].adjoint();
    Mat q, r;
    thin_qr(stacked, q, r);
    s.m[0] = q.topRows(dr).adjoint();
    s.m[1] = q.bottomRows(dr).adjoint();
    auto& prv = sites_[static_cast<std::size_t>(center_) - 1];
    prv.m[0] = prv.m[0] * r.adjoint();
    prv.m[1] = prv.m[1] * r.adjoint();
    --center_;
}

void MPSState::move_center(int target) {
    while (center_ < target) shift_right();
    while (center_ > target) shift_left();
}

void MPSState::apply_single(int q, const Eigen::Matrix2cd& u) {
    auto& s = sites_[static_cast<std::size_t>(q)];
    Mat a = u(0, 0) * s.m[0] + u(0, 1) * s.m[1];
    Mat b = u(1, 0) * s.m[0] + u(1, 1) * s.m[1];
    s.m[0] = std::move(a);
    s.m[1] = std::move(b);
}

void MPSState::apply_bond(int b, const Eigen::Matrix4cd& u, bool keep_right) {
    auto& left = sites_[static_cast<std::size_t>(b)];
    auto& right = sites_[static_cast<std::size_t>(b) + 1];
    const long dl = left.dl(), dr = right.dr();

    Mat theta(2 * dl, 2 * dr);
    for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
            theta.block(s1 * dl, s2 * dr, dl, dr) = left.m[s1] * right.m[s2];

    Mat out = Mat::Zero(2 * dl, 2 * dr);
    for (int t1 = 0; t1 < 2; ++t1)
        for (int t2 = 0; t2 < 2; ++t2)
            for (int s1 = 0; s1 < 2; ++s1)
                for (int s2 = 0; s2 < 2; ++s2) {
                    cplx g = u(t1 + 2 * t2, s1 + 2 * s2);
                    if (g != 0.0)
                        out.block(t1 * dl, t2 * dr, dl, dr) +=
                            g * theta.block(s1 * dl, s2 * dr, dl, dr);
                }

    Mat usvd, vt;
    Eigen::VectorXd sv;
    thin_svd(out, usvd, sv, vt);

    const long kfull = sv.size();
    double total = sv.squaredNorm();
    if (total <= 0.0) throw NumericalError("zero-norm bond after gate");

    long chi = kfull;
    double tail = 0.0;
    while (chi > 1) {
        double w = sv[chi - 1] * sv[chi - 1];
        if ((tail + w) / total > opt_.trunc_tol) break;
        tail += w;
        --chi;
    }
    if (opt_.max_bond > 0 && chi > opt_.max_bond) {
        chi = opt_.max_bond;
        tail = 0.0;
        for (long i = chi; i < kfull; ++i) tail += sv[i] * sv[i];
    }
    double rel_discarded = tail / total;
    if (rel_discarded > opt_.discard_fail)
        throw NumericalError("bond truncation would discard relative weight " +
                             std::to_string(rel_discarded) + " (cap max_bond too small?)");
    discarded_total_ += rel_discarded;
    max_bond_seen_ = std::max(max_bond_seen_, static_cast<int>(chi));

    // rescale the kept spectrum so the state norm is unchanged
    double kept = total - tail;
    Eigen::VectorXd skept = sv.head(chi) * std::sqrt(total / kept);

    if (keep_right) {
        for (int s1 = 0; s1 < 2; ++s1) left.m[s1] = usvd.block(s1 * dl, 0, dl, chi);
        Mat svt = skept.asDiagonal() * vt.topRows(chi);
        for (int s2 = 0; s2 < 2; ++s2) right.m[s2] = svt.block(0, s2 * dr, chi, dr);
        center_ = b + 1;
    } else {
        Mat us = usvd.leftCols(chi) * skept.asDiagonal();
        for (int s1 = 0; s1 < 2; ++s1) left.m[s1] = us.block(s1 * dl, 0, dl, chi);
        for (int s2 = 0; s2 < 2; ++s2) right.m[s2] = vt.block(0, s2 * dr, chi, dr);
        center_ = b;
    }
    check_memory();
}

void MPSState::check_memory() const {
    std::size_t bytes = 0;
    for (const auto& s : sites_)
        bytes += 2 * static_cast<std::size_t>(s.dl()) * static_cast<std::size_t>(s.dr()) * 16;
    if (bytes > opt_.mem_budget)
        throw ResourceError("mps tensors need " + std::to_string(bytes) +
                            " bytes, budget is " + std::to_string(opt_.mem_budget));
}

void MPSState::apply(const GateOp& g) {
    switch (g.kind) {
    case GateKind::HadamardLayer:
        for (int q = 0; q < n_qubits(); ++q) apply_single(q, hadamard_unitary());
        break;
    case GateKind::PauliX:
    case GateKind::PauliY:
    case GateKind::PauliZ:
    case GateKind::FieldRotation: apply_single(g.q, single_qubit_unitary(g)); break;
    case GateKind::CouplingRotation: {
        const int b = g.q;
        bool keep_right = center_ <= b;
        move_center(keep_right ? b : b + 1);
        apply_bond(b, coupling_unitary(g.angle), keep_right);
        break;
    }
    }
}

void MPSState::evolve_circuit(const Circuit& c) {
    if (c.n_qubits != n_qubits()) throw ConfigError("circuit and mps disagree on qubit count");
    for (const auto& g : c.ops) apply(g);
    basis_label_ = c.measure_basis;
}

double MPSState::site_product_expectation(std::span<const std::uint32_t> support, char op) {
    if (support.empty()) return 1.0;
    for (std::size_t i = 0; i + 1 < support.size(); ++i)
        if (support[i] >= support[i + 1]) throw ConfigError("support must be sorted ascending");
    if (op != 'X' && op != 'Z') throw ConfigError("site product supports X or Z");

    const int l = static_cast<int>(support.front());
    const int r = static_cast<int>(support.back());
    move_center(l);

    Mat env = Mat::Identity(sites_[static_cast<std::size_t>(l)].dl(),
                            sites_[static_cast<std::size_t>(l)].dl());
    std::size_t si = 0;
    for (int k = l; k <= r; ++k) {
        const auto& s = sites_[static_cast<std::size_t>(k)];
        bool hit = si < support.size() && static_cast<int>(support[si]) == k;
        if (hit) ++si;
        if (!hit) {
            env = (s.m[0].adjoint() * env * s.m[0] + s.m[1].adjoint() * env * s.m[1]).eval();
        } else if (op == 'X') {
            env = (s.m[0].adjoint() * env * s.m[1] + s.m[1].adjoint() * env * s.m[0]).eval();
        } else {
            env = (s.m[0].adjoint() * env * s.m[0] - s.m[1].adjoint() * env * s.m[1]).eval();
        }
    }
    cplx tr = env.trace();
    if (std::abs(tr.imag()) > 1e-10)
        throw NumericalError("site product expectation has imaginary part " +
                             std::to_string(tr.imag()));
    return tr.real();
}

double MPSState::expect_moment(const MomentExpansion& e, bool diagonal) {
    if (e.n_qubits != n_qubits()) throw ConfigError("moment expansion built for different N");
    const char op = diagonal ? 'Z' : 'X';
    double acc = 0.0;
    for (const auto& t : e.terms)
        acc += e.coefficient(t) * (t.support.empty() ? 1.0 : site_product_expectation(t.support, op));
    return acc;
}

BitstringBatch MPSState::sample(std::uint64_t shots, std::uint64_t seed, char basis) const {
    MPSState tmp = *this;
    char label = basis == 0 ? basis_label_ : basis;
    if (basis == 'X' && basis_label_ != 'X')
        for (int q = 0; q < n_qubits(); ++q) tmp.apply_single(q, hadamard_unitary());
    tmp.move_center(0);

    const int n = n_qubits();
    BitstringBatch batch;
    batch.n_qubits = n;
    batch.basis = label;
    batch.words_per_shot = words_for(n);
    batch.reserve(shots);

    Rng root(seed);
    std::vector<std::uint64_t> w(static_cast<std::size_t>(batch.words_per_shot));
    using RowVec = Eigen::RowVectorXcd;

    for (std::uint64_t shot = 0; shot < shots; ++shot) {
        Rng rng = root.derive(shot);
        std::fill(w.begin(), w.end(), 0ull);
        RowVec v = RowVec::Ones(1);
        for (int k = 0; k < n; ++k) {
            const auto& s = tmp.sites_[static_cast<std::size_t>(k)];
            RowVec w0 = v * s.m[0];
            RowVec w1 = v * s.m[1];
            double p0 = w0.squaredNorm(), p1 = w1.squaredNorm();
            double u = rng.u01() * (p0 + p1);
            bool bit = u >= p0;
            if (bit && p1 <= 0.0) bit = false; // fp guard
            if (!bit && p0 <= 0.0) bit = true;
            if (bit) {
                w[static_cast<std::size_t>(k) / 64] |= std::uint64_t{1} << (k % 64);
                v = w1 / std::sqrt(p1);
            } else {
                v = w0 / std::sqrt(p0);
            }
        }
        batch.push_shot(w.data(), -1, nullptr);
    }
    return batch;
}

std::vector<std::complex<double>> MPSState::to_dense() const {
    const int n = n_qubits();
    if (n > 20) throw ResourceError("to_dense only supports up to 20 qubits");
    std::vector<Eigen::RowVectorXcd> partial{Eigen::RowVectorXcd::Ones(1)};
    for (int k = 0; k < n; ++k) {
        const auto& s = sites_[static_cast<std::size_t>(k)];
        std::vector<Eigen::RowVectorXcd> next(partial.size() * 2);
        for (std::size_t i = 0; i < partial.size(); ++i) {
            // bit k of the amplitude index selects the physical state of site k
            next[i] = partial[i] * s.m[0];
            next[i + partial.size()] = partial[i] * s.m[1];
        }
        partial = std::move(next);
    }
    std::vector<cplx> out(partial.size());
    for (std::size_t i = 0; i < partial.size(); ++i) out[i] = partial[i](0);
    return out;
}

void MPSState::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open checkpoint for writing: " + path);
    f.write("KZMPS001", 8);
    auto w64 = [&](std::int64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    w64(n_qubits());
    w64(center_);
    w64(basis_label_);
    for (const auto& s : sites_) {
        w64(s.dl());
        w64(s.dr());
        for (const auto& m : s.m)
            f.write(reinterpret_cast<const char*>(m.data()),
                    static_cast<std::streamsize>(sizeof(cplx) * static_cast<std::size_t>(m.size())));
    }
    if (!f) throw ConfigError("short write on checkpoint: " + path);
}

MPSState MPSState::load(const std::string& path, const Options& opt) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::string(magic, 8) != "KZMPS001")
        throw ConfigError("bad checkpoint magic in " + path);
    auto r64 = [&]() {
        std::int64_t v = -1; // poison value survives a short read
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    MPSState st;
    st.opt_ = opt;
    std::int64_t n = r64();
    std::int64_t center = r64();
    std::int64_t label = r64();
    if (n < 2 || n > 100000 || center < 0 || center >= n)
        throw ConfigError("corrupt checkpoint header in " + path);
    st.center_ = static_cast<int>(center);
    st.basis_label_ = static_cast<char>(label);
    st.sites_.resize(static_cast<std::size_t>(n));
    std::int64_t expect_dl = 1;
    for (std::size_t k = 0; k < st.sites_.size(); ++k) {
        auto& s = st.sites_[k];
        std::int64_t dl = r64(), dr = r64();
        if (dl != expect_dl || dr < 1 || (k + 1 == st.sites_.size() && dr != 1))
            throw ConfigError("corrupt tensor shape chain in " + path);
        expect_dl = dr;
        for (auto& m : s.m) {
            m.resize(dl, dr);
            f.read(reinterpret_cast<char*>(m.data()),
                   static_cast<std::streamsize>(sizeof(cplx) * static_cast<std::size_t>(m.size())));
        }
        st.max_bond_seen_ = std::max(st.max_bond_seen_, static_cast<int>(std::max(dl, dr)));
    }
    if (!f) throw ConfigError("truncated checkpoint: " + path);
    st.check_memory();
    return st;
}

} // namespace kz
