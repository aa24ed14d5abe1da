#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "kz/kernels.hpp"
#include "kz/rng.hpp"
#include "oracle_utils.hpp"

using namespace kz;

namespace {

struct DenseState {
    int n;
    std::vector<double> re, im;
    DenseState(int n_qubits, Rng& r) : n(n_qubits) {
        std::size_t dim = std::size_t{1} << n;
        re.resize(dim);
        im.resize(dim);
        double norm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            re[i] = r.normal();
            im[i] = r.normal();
            norm += re[i] * re[i] + im[i] * im[i];
        }
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < dim; ++i) {
            re[i] /= norm;
            im[i] /= norm;
        }
    }
    oracle::Vec vec() const {
        oracle::Vec v(re.size());
        for (std::size_t i = 0; i < re.size(); ++i) v(i) = {re[i], im[i]};
        return v;
    }
    double max_diff(const oracle::Vec& v) const {
        double d = 0.0;
        for (std::size_t i = 0; i < re.size(); ++i)
            d = std::max(d, std::abs(oracle::cplx(re[i], im[i]) - v(i)));
        return d;
    }
};

} // namespace

TEST_CASE("scalar kernels match the dense Eigen gate unitaries") {
    Rng r(31);
    const auto& k = kernels::scalar();
    for (int n : {2, 3, 4, 6}) {
        std::size_t dim = std::size_t{1} << n;
        for (int q = 0; q < n; ++q) {
            double th = r.u01() * 6.28 - 3.14;
            double c = std::cos(th), s = std::sin(th);

            DenseState st(n, r);
            auto v = st.vec();
            k.phase_rot(st.re.data(), st.im.data(), dim, q, c, s);
            CHECK(st.max_diff(oracle::gate_unitary(n, {GateKind::FieldRotation, q, th}) * v) < 1e-13);

            DenseState sh(n, r);
            v = sh.vec();
            k.hadamard(sh.re.data(), sh.im.data(), dim, q);
            CHECK(sh.max_diff(oracle::op_on(n, q, oracle::pauli('H')) * v) < 1e-13);

            for (char p : {'X', 'Y', 'Z'}) {
                DenseState sp(n, r);
                v = sp.vec();
                auto f = p == 'X' ? k.pauli_x : p == 'Y' ? k.pauli_y : k.pauli_z;
                f(sp.re.data(), sp.im.data(), dim, q);
                CHECK(sp.max_diff(oracle::op_on(n, q, oracle::pauli(p)) * v) < 1e-13);
            }

            if (q + 1 < n) {
                DenseState sx(n, r);
                v = sx.vec();
                k.xx_rot(sx.re.data(), sx.im.data(), dim, q, c, s);
                CHECK(sx.max_diff(oracle::gate_unitary(n, {GateKind::CouplingRotation, q, th}) * v) <
                      1e-13);
            }
        }
    }
}

TEST_CASE("xor_dot equals the dense X-product expectation") {
    Rng r(32);
    const auto& k = kernels::scalar();
    for (int n : {2, 4, 5}) {
        std::size_t dim = std::size_t{1} << n;
        DenseState st(n, r);
        auto v = st.vec();
        for (int rep = 0; rep < 10; ++rep) {
            std::uint64_t mask = r.next() & (dim - 1);
            std::vector<std::uint32_t> sup;
            for (int q = 0; q < n; ++q)
                if ((mask >> q) & 1) sup.push_back(q);
            auto got = k.xor_dot(st.re.data(), st.im.data(), dim, mask);
            auto want = (v.adjoint() * oracle::x_product(n, sup) * v)(0, 0);
            CHECK(std::abs(got - want) < 1e-13);
        }
    }
}

TEST_CASE("avx2 kernels agree with scalar on every branch") {
    if (!kernels::avx2_supported()) {
        MESSAGE("AVX2 not available, skipping");
        return;
    }
    const auto& ks = kernels::scalar();
    const auto& kv = kernels::avx2();
    Rng r(33);
    // n spans the low-qubit special cases and the wide vector paths
    for (int n : {2, 3, 4, 5, 7, 10}) {
        std::size_t dim = std::size_t{1} << n;
        for (int q = 0; q < n; ++q) {
            double th = r.u01() * 6.28 - 3.14;
            double c = std::cos(th), s = std::sin(th);

            DenseState a(n, r);
            DenseState b = a;
            ks.phase_rot(a.re.data(), a.im.data(), dim, q, c, s);
            kv.phase_rot(b.re.data(), b.im.data(), dim, q, c, s);
            CHECK(a.max_diff(b.vec()) < 1e-14);

            DenseState ha(n, r);
            DenseState hb = ha;
            ks.hadamard(ha.re.data(), ha.im.data(), dim, q);
            kv.hadamard(hb.re.data(), hb.im.data(), dim, q);
            CHECK(ha.max_diff(hb.vec()) < 1e-14);

            for (int p = 0; p < 3; ++p) {
                DenseState pa(n, r);
                DenseState pb = pa;
                auto fs = p == 0 ? ks.pauli_x : p == 1 ? ks.pauli_y : ks.pauli_z;
                auto fv = p == 0 ? kv.pauli_x : p == 1 ? kv.pauli_y : kv.pauli_z;
                fs(pa.re.data(), pa.im.data(), dim, q);
                fv(pb.re.data(), pb.im.data(), dim, q);
                CHECK(pa.max_diff(pb.vec()) == 0.0); // pure permutation/negation
            }

            if (q + 1 < n) {
                DenseState xa(n, r);
                DenseState xb = xa;
                ks.xx_rot(xa.re.data(), xa.im.data(), dim, q, c, s);
                kv.xx_rot(xb.re.data(), xb.im.data(), dim, q, c, s);
                CHECK(xa.max_diff(xb.vec()) < 1e-14);
            }
        }
        // xor_dot: aligned and unaligned masks
        DenseState st(n, r);
        for (int rep = 0; rep < 20; ++rep) {
            std::uint64_t mask = r.next() & (dim - 1);
            auto gs = ks.xor_dot(st.re.data(), st.im.data(), dim, mask);
            auto gv = kv.xor_dot(st.re.data(), st.im.data(), dim, mask);
            CHECK(std::abs(gs - gv) < 1e-13);
        }
    }
}

TEST_CASE("dispatch honors explicit selection") {
    kernels::set_active("scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    if (kernels::avx2_supported()) {
        kernels::set_active("avx2");
        CHECK(std::string(kernels::active().name) == "avx2");
    }
    kernels::set_active("auto");
    CHECK_THROWS(kernels::set_active("sse9"));
}
