#pragma once

#include <functional>
#include <vector>

#include "eosfm/tensor.hpp"

namespace eos::nn {

/// A trainable tensor with its gradient accumulator.
struct Param {
    Tensor value;
    Tensor grad;

    Param() = default;
    explicit Param(Tensor v) : value(std::move(v)), grad(Tensor(value.shape)) {}
    void zero_grad() { grad.fill(0.0f); }
    int64_t numel() const { return value.numel(); }
};

/// 2D convolution, NCHW. groups must be 1 or equal to both channel counts
/// (depthwise). Weight layout [outC, inC/groups, k, k].
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int padding, int groups, Rng& rng);

    Tensor forward(const Tensor& x, bool grad_mode);
    Tensor backward(const Tensor& gy);

    std::vector<Param*> params() { return {&weight, &bias}; }

    Param weight;
    Param bias;
    int in_ch = 0, out_ch = 0, kernel = 1, stride = 1, padding = 0, groups = 1;

private:
    Tensor saved_input_;
};

class Gelu {
public:
    Tensor forward(const Tensor& x, bool grad_mode);
    Tensor backward(const Tensor& gy);

private:
    Tensor saved_input_;
};

/// Global response normalization (per-sample channel norm rebalancing),
/// gamma/beta initialized to zero so a fresh layer is the identity.
class Grn {
public:
    Grn() = default;
    explicit Grn(int channels);

    Tensor forward(const Tensor& x, bool grad_mode);
    Tensor backward(const Tensor& gy);
    std::vector<Param*> params() { return {&gamma, &beta}; }

    Param gamma;
    Param beta;
    static constexpr float kEps = 1e-6f;

private:
    Tensor saved_input_;
};

class Linear {
public:
    Linear() = default;
    Linear(int in_features, int out_features, Rng& rng);

    Tensor forward(const Tensor& x, bool grad_mode);  // [B, in] -> [B, out]
    Tensor backward(const Tensor& gy);
    std::vector<Param*> params() { return {&weight, &bias}; }

    Param weight;  // [out, in]
    Param bias;    // [out]
    int in_features = 0, out_features = 0;

private:
    Tensor saved_input_;
};

Tensor upsample_bilinear(const Tensor& x, int out_h, int out_w);
Tensor upsample_bilinear_backward(const Tensor& gy, int in_h, int in_w);

Tensor global_avg_pool(const Tensor& x);  // [B,C,H,W] -> [B,C]
Tensor global_avg_pool_backward(const Tensor& gy, int h, int w);

/// Mean cross-entropy over [B,K] logits; writes d loss/d logits if grad != nullptr.
double softmax_ce_loss(const Tensor& logits, const std::vector<int>& labels, Tensor* grad);

/// Mean per-pixel cross-entropy over [B,K,H,W] logits against [B*H*W] labels
/// (row-major over b, y, x).
double softmax_ce_loss_dense(const Tensor& logits, const std::vector<int>& labels, Tensor* grad);

double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad);

class Adam {
public:
    Adam(std::vector<Param*> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
         float eps = 1e-8f);
    void zero_grad();
    void step();
    float lr;

private:
    std::vector<Param*> params_;
    std::vector<Tensor> m_, v_;
    float beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace eos::nn
