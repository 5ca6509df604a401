#include <doctest.h>

#include "mvi/kernels/kernels.hpp"
#include "mvi/rng.hpp"

#include <cmath>
#include <vector>

using namespace mvi;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(scale * rng.next_normal());
    return v;
}

/// Naive float64 GEMM used as an independent numerical oracle.
std::vector<double> gemm_oracle(std::size_t M, std::size_t N, std::size_t K,
                                const std::vector<float>& A, const std::vector<float>& B) {
    std::vector<double> C(M * N, 0.0);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n)
                C[m * N + n] += static_cast<double>(A[m * K + k]) *
                                static_cast<double>(B[k * N + n]);
    return C;
}

bool simd_lane_built() {
    return kern::backend_available(kern::Backend::avx2) ||
           kern::backend_available(kern::Backend::neon);
}

const kern::KernelTable& simd_table() {
#ifdef MVI_HAVE_AVX2_TU
    if (kern::backend_available(kern::Backend::avx2)) return kern::avx2_table();
#endif
#ifdef MVI_HAVE_NEON_TU
    return kern::neon_table();
#endif
    return kern::scalar_table();
}

} // namespace

TEST_CASE("gemm matches the float64 oracle across shapes and tails") {
    const auto& kt = kern::active();
    for (auto [M, N, K] : {std::array<std::size_t, 3>{1, 1, 1},
                           {4, 8, 16},
                           {5, 7, 3},
                           {17, 23, 31},
                           {128, 8, 27},
                           {33, 16, 72},
                           {6, 1, 9}}) {
        const auto A = random_vec(M * K, 1000 + M * 31 + N);
        const auto B = random_vec(K * N, 2000 + K);
        std::vector<float> C(M * N, 0.0f);
        kt.gemm(M, N, K, A.data(), K, B.data(), N, C.data(), N, false);
        const auto O = gemm_oracle(M, N, K, A, B);
        for (std::size_t i = 0; i < C.size(); ++i) {
            const double err = std::abs(static_cast<double>(C[i]) - O[i]);
            const double tol = 1e-5 * std::max(1.0, std::abs(O[i]));
            CHECK(err <= tol);
        }
    }
}

TEST_CASE("gemm accumulate adds on top of existing values") {
    const auto& kt = kern::active();
    const std::size_t M = 9, N = 13, K = 21;
    const auto A = random_vec(M * K, 31);
    const auto B = random_vec(K * N, 32);
    std::vector<float> C0(M * N, 0.0f), C1(M * N, 0.0f);
    kt.gemm(M, N, K, A.data(), K, B.data(), N, C0.data(), N, false);
    kt.gemm(M, N, K, A.data(), K, B.data(), N, C1.data(), N, false);
    kt.gemm(M, N, K, A.data(), K, B.data(), N, C1.data(), N, true);
    for (std::size_t i = 0; i < C0.size(); ++i)
        CHECK(C1[i] == doctest::Approx(2.0 * C0[i]).epsilon(1e-6));
}

TEST_CASE("gemm_tn equals an explicit transpose through plain gemm oracle") {
    const auto& kt = kern::active();
    const std::size_t M = 18, N = 11, K = 37; // C[M,N] = A^T B, A stored [K,M]
    const auto A = random_vec(K * M, 55);
    const auto B = random_vec(K * N, 56);
    std::vector<float> C(M * N, 0.0f);
    kt.gemm_tn(M, N, K, A.data(), M, B.data(), N, C.data(), N, false);
    std::vector<float> At(M * K);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < M; ++m) At[m * K + k] = A[k * M + m];
    const auto O = gemm_oracle(M, N, K, At, B);
    for (std::size_t i = 0; i < C.size(); ++i)
        CHECK(std::abs(static_cast<double>(C[i]) - O[i]) <=
              1e-5 * std::max(1.0, std::abs(O[i])));
}

TEST_CASE("SIMD lane reproduces the scalar lane bit for bit") {
    if (!simd_lane_built()) return; // scalar-only build
    const auto& sc = kern::scalar_table();
    const auto& sv = simd_table();

    SUBCASE("gemm") {
        for (auto [M, N, K] : {std::array<std::size_t, 3>{16, 16, 32},
                               {7, 9, 13},
                               {1024, 8, 72},
                               {5, 32, 288},
                               {3, 3, 3}}) {
            const auto A = random_vec(M * K, 7 + M);
            const auto B = random_vec(K * N, 8 + N);
            std::vector<float> C1(M * N, 0.5f), C2(M * N, 0.5f);
            sc.gemm(M, N, K, A.data(), K, B.data(), N, C1.data(), N, true);
            sv.gemm(M, N, K, A.data(), K, B.data(), N, C2.data(), N, true);
            CHECK(C1 == C2);
        }
    }
    SUBCASE("gemm_tn") {
        const std::size_t M = 72, N = 16, K = 1000;
        const auto A = random_vec(K * M, 91);
        const auto B = random_vec(K * N, 92);
        std::vector<float> C1(M * N, 0.0f), C2(M * N, 0.0f);
        sc.gemm_tn(M, N, K, A.data(), M, B.data(), N, C1.data(), N, false);
        sv.gemm_tn(M, N, K, A.data(), M, B.data(), N, C2.data(), N, false);
        CHECK(C1 == C2);
    }
    SUBCASE("bias_relu and bias_add") {
        const std::size_t rows = 333, ch = 9; // awkward channel count
        const auto x = random_vec(rows * ch, 17);
        const auto b = random_vec(ch, 18);
        std::vector<float> y1(rows * ch), y2(rows * ch);
        sc.bias_relu(rows, ch, x.data(), b.data(), y1.data());
        sv.bias_relu(rows, ch, x.data(), b.data(), y2.data());
        CHECK(y1 == y2);
        sc.bias_add(rows, ch, x.data(), b.data(), y1.data());
        sv.bias_add(rows, ch, x.data(), b.data(), y2.data());
        CHECK(y1 == y2);
    }
    SUBCASE("relu_bwd") {
        const std::size_t n = 1003;
        const auto out = random_vec(n, 21);
        auto g1 = random_vec(n, 22);
        auto g2 = g1;
        sc.relu_bwd(n, out.data(), g1.data());
        sv.relu_bwd(n, out.data(), g2.data());
        CHECK(g1 == g2);
    }
    SUBCASE("axpy") {
        const std::size_t n = 777;
        const auto x = random_vec(n, 23);
        auto y1 = random_vec(n, 24);
        auto y2 = y1;
        sc.axpy(n, 0.37f, x.data(), y1.data());
        sv.axpy(n, 0.37f, x.data(), y2.data());
        CHECK(y1 == y2);
    }
    SUBCASE("adam") {
        const std::size_t n = 531;
        auto p1 = random_vec(n, 25), m1 = random_vec(n, 26, 0.01),
             v1 = random_vec(n, 27, 0.0);
        for (auto& x : v1) x = std::abs(x) + 0.01f;
        auto p2 = p1, m2 = m1, v2 = v1;
        const auto g = random_vec(n, 28);
        sc.adam(n, p1.data(), m1.data(), v1.data(), g.data(), 1e-3f, 0.9f, 0.999f, 1e-8f,
                0.1f, 0.001f);
        sv.adam(n, p2.data(), m2.data(), v2.data(), g.data(), 1e-3f, 0.9f, 0.999f, 1e-8f,
                0.1f, 0.001f);
        CHECK(p1 == p2);
        CHECK(m1 == m2);
        CHECK(v1 == v2);
    }
}

TEST_CASE("backend selection honors explicit requests") {
    CHECK(kern::backend_available(kern::Backend::scalar));
    kern::set_backend(kern::Backend::scalar);
    CHECK(kern::active_name() == "scalar");
    kern::reset_backend();
    CHECK(!kern::active_name().empty());
}
