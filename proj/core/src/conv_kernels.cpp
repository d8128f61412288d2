#include "conv_kernels.hpp"

#include <cstring>
#include <vector>

namespace hsaw::nn::detail {

namespace {

// C[M x N] (+)= A[M x K] * B[K x N], all row-major
void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C) {
    for (int m = 0; m < M; ++m) {
        float* crow = C + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            const float a = A[static_cast<std::size_t>(m) * K + k];
            const float* brow = B + static_cast<std::size_t>(k) * N;
            for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

// C[M x N] += A[M x K] * B^T where B is [N x K]
void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C) {
    for (int m = 0; m < M; ++m) {
        const float* arow = A + static_cast<std::size_t>(m) * K;
        for (int n = 0; n < N; ++n) {
            const float* brow = B + static_cast<std::size_t>(n) * K;
            float acc = 0.0f;
            for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
            C[static_cast<std::size_t>(m) * N + n] += acc;
        }
    }
}

// C[M x N] += A^T * B where A is [K x M], B is [K x N]
void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C) {
    for (int k = 0; k < K; ++k) {
        const float* arow = A + static_cast<std::size_t>(k) * M;
        const float* brow = B + static_cast<std::size_t>(k) * N;
        for (int m = 0; m < M; ++m) {
            const float a = arow[m];
            float* crow = C + static_cast<std::size_t>(m) * N;
            for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

// col[(ci*k*k) x (oh*ow)] from one input image
void im2col(const ConvDims& d, const float* in, float* col) {
    const int HW = d.h * d.w;
    for (int ci = 0; ci < d.cin; ++ci) {
        const float* plane = in + static_cast<std::size_t>(ci) * HW;
        for (int kh = 0; kh < d.k; ++kh) {
            for (int kw = 0; kw < d.k; ++kw) {
                float* dst = col + static_cast<std::size_t>((ci * d.k + kh) * d.k + kw) * d.oh * d.ow;
                for (int oh = 0; oh < d.oh; ++oh) {
                    const int ih = oh * d.stride - d.pad + kh;
                    if (ih < 0 || ih >= d.h) {
                        std::memset(dst + static_cast<std::size_t>(oh) * d.ow, 0,
                                    sizeof(float) * static_cast<std::size_t>(d.ow));
                        continue;
                    }
                    const float* src = plane + static_cast<std::size_t>(ih) * d.w;
                    float* drow = dst + static_cast<std::size_t>(oh) * d.ow;
                    for (int ow = 0; ow < d.ow; ++ow) {
                        const int iw = ow * d.stride - d.pad + kw;
                        drow[ow] = (iw >= 0 && iw < d.w) ? src[iw] : 0.0f;
                    }
                }
            }
        }
    }
}

// scatter-add of a column buffer back into one input image
void col2im_add(const ConvDims& d, const float* col, float* in) {
    const int HW = d.h * d.w;
    for (int ci = 0; ci < d.cin; ++ci) {
        float* plane = in + static_cast<std::size_t>(ci) * HW;
        for (int kh = 0; kh < d.k; ++kh) {
            for (int kw = 0; kw < d.k; ++kw) {
                const float* src = col + static_cast<std::size_t>((ci * d.k + kh) * d.k + kw) * d.oh * d.ow;
                for (int oh = 0; oh < d.oh; ++oh) {
                    const int ih = oh * d.stride - d.pad + kh;
                    if (ih < 0 || ih >= d.h) continue;
                    float* drow = plane + static_cast<std::size_t>(ih) * d.w;
                    const float* srow = src + static_cast<std::size_t>(oh) * d.ow;
                    for (int ow = 0; ow < d.ow; ++ow) {
                        const int iw = ow * d.stride - d.pad + kw;
                        if (iw >= 0 && iw < d.w) drow[iw] += srow[ow];
                    }
                }
            }
        }
    }
}

}  // namespace

void conv_forward(const ConvDims& d, const float* in, const float* weight,
                  const float* bias, float* out) {
    const int ckk = d.cin * d.k * d.k;
    const int ohw = d.oh * d.ow;
    std::vector<float> col(static_cast<std::size_t>(ckk) * ohw);
    for (int n = 0; n < d.n; ++n) {
        im2col(d, in + static_cast<std::size_t>(n) * d.cin * d.h * d.w, col.data());
        float* outn = out + static_cast<std::size_t>(n) * d.cout * ohw;
        for (int co = 0; co < d.cout; ++co) {
            const float b = bias ? bias[co] : 0.0f;
            float* row = outn + static_cast<std::size_t>(co) * ohw;
            for (int i = 0; i < ohw; ++i) row[i] = b;
        }
        gemm_nn(d.cout, ohw, ckk, weight, col.data(), outn);
    }
}

void conv_grad_input(const ConvDims& d, const float* dout, const float* weight, float* din) {
    const int ckk = d.cin * d.k * d.k;
    const int ohw = d.oh * d.ow;
    std::vector<float> col(static_cast<std::size_t>(ckk) * ohw);
    for (int n = 0; n < d.n; ++n) {
        std::memset(col.data(), 0, col.size() * sizeof(float));
        // col = W^T [ckk x cout] * dOut [cout x ohw]
        gemm_tn(ckk, ohw, d.cout, weight, dout + static_cast<std::size_t>(n) * d.cout * ohw,
                col.data());
        col2im_add(d, col.data(), din + static_cast<std::size_t>(n) * d.cin * d.h * d.w);
    }
}

void conv_grad_weight(const ConvDims& d, const float* in, const float* dout,
                      float* dweight, float* dbias) {
    const int ckk = d.cin * d.k * d.k;
    const int ohw = d.oh * d.ow;
    std::vector<float> col(static_cast<std::size_t>(ckk) * ohw);
    for (int n = 0; n < d.n; ++n) {
        const float* doutn = dout + static_cast<std::size_t>(n) * d.cout * ohw;
        im2col(d, in + static_cast<std::size_t>(n) * d.cin * d.h * d.w, col.data());
        // dW [cout x ckk] += dOut [cout x ohw] * col^T [ohw x ckk]
        gemm_nt(d.cout, ckk, ohw, doutn, col.data(), dweight);
        if (dbias) {
            for (int co = 0; co < d.cout; ++co) {
                const float* row = doutn + static_cast<std::size_t>(co) * ohw;
                float acc = 0.0f;
                for (int i = 0; i < ohw; ++i) acc += row[i];
                dbias[co] += acc;
            }
        }
    }
}

}  // namespace hsaw::nn::detail
