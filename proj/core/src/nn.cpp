#include "eosfm/nn.hpp"

#include <Eigen/Core>
#include <cmath>

namespace eos::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

int conv_out_size(int in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

// col buffer layout: [inC*k*k, outH*outW]
void im2col(const Tensor& x, int b, int kernel, int stride, int padding, int out_h, int out_w,
            float* col) {
    const int c_in = x.shape[1], h = x.shape[2], w = x.shape[3];
    const int64_t plane = static_cast<int64_t>(h) * w;
    const float* xb = x.data.data() + static_cast<int64_t>(b) * c_in * plane;
    int64_t row = 0;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx, ++row) {
                float* dst = col + row * out_h * out_w;
                for (int oy = 0; oy < out_h; ++oy) {
                    int iy = oy * stride - padding + ky;
                    for (int ox = 0; ox < out_w; ++ox) {
                        int ix = ox * stride - padding + kx;
                        dst[oy * out_w + ox] =
                            (iy >= 0 && iy < h && ix >= 0 && ix < w) ? xb[c * plane + iy * w + ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im_add(const float* col, int c_in, int h, int w, int kernel, int stride, int padding,
                int out_h, int out_w, float* gx) {
    const int64_t plane = static_cast<int64_t>(h) * w;
    int64_t row = 0;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx, ++row) {
                const float* src = col + row * out_h * out_w;
                for (int oy = 0; oy < out_h; ++oy) {
                    int iy = oy * stride - padding + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < out_w; ++ox) {
                        int ix = ox * stride - padding + kx;
                        if (ix < 0 || ix >= w) continue;
                        gx[c * plane + iy * w + ix] += src[oy * out_w + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Conv2d::Conv2d(int in_c, int out_c, int k, int s, int p, int g, Rng& rng)
    : in_ch(in_c), out_ch(out_c), kernel(k), stride(s), padding(p), groups(g) {
    if (g != 1 && (g != in_c || g != out_c))
        throw InvalidArgument("Conv2d: groups must be 1 or equal to both channel counts");
    int fan_in = (in_c / g) * k * k;
    float std = std::sqrt(2.0f / static_cast<float>(fan_in));
    weight = Param(Tensor::randn({out_c, in_c / g, k, k}, rng, std));
    bias = Param(Tensor::zeros({out_c}));
}

Tensor Conv2d::forward(const Tensor& x, bool grad_mode) {
    if (x.ndim() != 4 || x.shape[1] != in_ch)
        throw ShapeError("Conv2d: expected [B," + std::to_string(in_ch) + ",H,W], got " + x.shape_str());
    const int batch = x.shape[0], h = x.shape[2], w = x.shape[3];
    const int oh = conv_out_size(h, kernel, stride, padding);
    const int ow = conv_out_size(w, kernel, stride, padding);
    if (oh <= 0 || ow <= 0) throw ShapeError("Conv2d: input " + x.shape_str() + " too small for kernel");
    Tensor out({batch, out_ch, oh, ow});

    if (grad_mode) saved_input_ = x;

    if (groups == 1) {
        const int ckk = in_ch * kernel * kernel;
        std::vector<float> col(static_cast<size_t>(ckk) * oh * ow);
        CMapMat wm(weight.value.data.data(), out_ch, ckk);
        for (int b = 0; b < batch; ++b) {
            im2col(x, b, kernel, stride, padding, oh, ow, col.data());
            CMapMat colm(col.data(), ckk, oh * ow);
            MapMat outm(out.data.data() + static_cast<int64_t>(b) * out_ch * oh * ow, out_ch, oh * ow);
            outm.noalias() = wm * colm;
            for (int o = 0; o < out_ch; ++o) outm.row(o).array() += bias.value[o];
        }
    } else {  // depthwise
        const int64_t plane = static_cast<int64_t>(h) * w;
        const int64_t oplane = static_cast<int64_t>(oh) * ow;
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < in_ch; ++c) {
                const float* xp = x.data.data() + (static_cast<int64_t>(b) * in_ch + c) * plane;
                const float* wp = weight.value.data.data() + static_cast<int64_t>(c) * kernel * kernel;
                float* op = out.data.data() + (static_cast<int64_t>(b) * out_ch + c) * oplane;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        float acc = bias.value[c];
                        for (int ky = 0; ky < kernel; ++ky) {
                            int iy = oy * stride - padding + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kernel; ++kx) {
                                int ix = ox * stride - padding + kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += wp[ky * kernel + kx] * xp[iy * w + ix];
                            }
                        }
                        op[oy * ow + ox] = acc;
                    }
                }
            }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const Tensor& x = saved_input_;
    const int batch = x.shape[0], h = x.shape[2], w = x.shape[3];
    const int oh = gy.shape[2], ow = gy.shape[3];
    Tensor gx(x.shape);

    if (groups == 1) {
        const int ckk = in_ch * kernel * kernel;
        std::vector<float> col(static_cast<size_t>(ckk) * oh * ow);
        std::vector<float> colg(static_cast<size_t>(ckk) * oh * ow);
        CMapMat wm(weight.value.data.data(), out_ch, ckk);
        MapMat gwm(weight.grad.data.data(), out_ch, ckk);
        for (int b = 0; b < batch; ++b) {
            im2col(x, b, kernel, stride, padding, oh, ow, col.data());
            CMapMat colm(col.data(), ckk, oh * ow);
            CMapMat gym(gy.data.data() + static_cast<int64_t>(b) * out_ch * oh * ow, out_ch, oh * ow);
            gwm.noalias() += gym * colm.transpose();
            for (int o = 0; o < out_ch; ++o) bias.grad[o] += gym.row(o).sum();
            MapMat colgm(colg.data(), ckk, oh * ow);
            colgm.noalias() = wm.transpose() * gym;
            col2im_add(colg.data(), in_ch, h, w, kernel, stride, padding, oh, ow,
                       gx.data.data() + static_cast<int64_t>(b) * in_ch * h * w);
        }
    } else {  // depthwise
        const int64_t plane = static_cast<int64_t>(h) * w;
        const int64_t oplane = static_cast<int64_t>(oh) * ow;
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < in_ch; ++c) {
                const float* xp = x.data.data() + (static_cast<int64_t>(b) * in_ch + c) * plane;
                const float* gp = gy.data.data() + (static_cast<int64_t>(b) * out_ch + c) * oplane;
                float* gxp = gx.data.data() + (static_cast<int64_t>(b) * in_ch + c) * plane;
                float* gwp = weight.grad.data.data() + static_cast<int64_t>(c) * kernel * kernel;
                const float* wp = weight.value.data.data() + static_cast<int64_t>(c) * kernel * kernel;
                double gb = 0.0;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        float g = gp[oy * ow + ox];
                        gb += g;
                        for (int ky = 0; ky < kernel; ++ky) {
                            int iy = oy * stride - padding + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kernel; ++kx) {
                                int ix = ox * stride - padding + kx;
                                if (ix < 0 || ix >= w) continue;
                                gwp[ky * kernel + kx] += g * xp[iy * w + ix];
                                gxp[iy * w + ix] += g * wp[ky * kernel + kx];
                            }
                        }
                    }
                }
                bias.grad[c] += static_cast<float>(gb);
            }
        }
    }
    return gx;
}

Tensor Gelu::forward(const Tensor& x, bool grad_mode) {
    if (grad_mode) saved_input_ = x;
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        float v = x.data[i];
        out.data[i] = 0.5f * v * (1.0f + std::erf(v * static_cast<float>(M_SQRT1_2)));
    }
    return out;
}

Tensor Gelu::backward(const Tensor& gy) {
    const Tensor& x = saved_input_;
    Tensor gx(x.shape);
    constexpr float inv_sqrt2pi = 0.3989422804014327f;
    for (size_t i = 0; i < x.data.size(); ++i) {
        float v = x.data[i];
        float cdf = 0.5f * (1.0f + std::erf(v * static_cast<float>(M_SQRT1_2)));
        float pdf = inv_sqrt2pi * std::exp(-0.5f * v * v);
        gx.data[i] = gy.data[i] * (cdf + v * pdf);
    }
    return gx;
}

Grn::Grn(int channels) {
    gamma = Param(Tensor::zeros({channels}));
    beta = Param(Tensor::zeros({channels}));
}

Tensor Grn::forward(const Tensor& x, bool grad_mode) {
    if (grad_mode) saved_input_ = x;
    const int batch = x.shape[0], c_n = x.shape[1];
    const int64_t plane = static_cast<int64_t>(x.shape[2]) * x.shape[3];
    Tensor out(x.shape);
    std::vector<double> g(c_n);
    for (int b = 0; b < batch; ++b) {
        double mean_norm = 0.0;
        for (int c = 0; c < c_n; ++c) {
            const float* p = x.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            double ss = 0.0;
            for (int64_t i = 0; i < plane; ++i) ss += static_cast<double>(p[i]) * p[i];
            g[c] = std::sqrt(ss);
            mean_norm += g[c];
        }
        mean_norm /= c_n;
        for (int c = 0; c < c_n; ++c) {
            float n = static_cast<float>(g[c] / (mean_norm + kEps));
            const float* p = x.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            float* o = out.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            float gm = gamma.value[c], bt = beta.value[c];
            for (int64_t i = 0; i < plane; ++i) o[i] = gm * (p[i] * n) + bt + p[i];
        }
    }
    return out;
}

Tensor Grn::backward(const Tensor& gy) {
    const Tensor& x = saved_input_;
    const int batch = x.shape[0], c_n = x.shape[1];
    const int64_t plane = static_cast<int64_t>(x.shape[2]) * x.shape[3];
    Tensor gx(x.shape);
    std::vector<double> g(c_n), n(c_n), a(c_n);
    for (int b = 0; b < batch; ++b) {
        double mean_norm = 0.0;
        for (int c = 0; c < c_n; ++c) {
            const float* p = x.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            double ss = 0.0;
            for (int64_t i = 0; i < plane; ++i) ss += static_cast<double>(p[i]) * p[i];
            g[c] = std::sqrt(ss);
            mean_norm += g[c];
        }
        mean_norm /= c_n;
        double denom = mean_norm + kEps;
        double sum_an = 0.0;
        for (int c = 0; c < c_n; ++c) {
            n[c] = g[c] / denom;
            const float* p = x.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            const float* q = gy.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            double dot = 0.0, gsum = 0.0;
            for (int64_t i = 0; i < plane; ++i) {
                dot += static_cast<double>(q[i]) * p[i];
                gsum += q[i];
            }
            a[c] = gamma.value[c] * dot;  // <gy, gamma_c * x_c>
            gamma.grad[c] += static_cast<float>(dot * n[c]);
            beta.grad[c] += static_cast<float>(gsum);
            sum_an += a[c] * n[c];
        }
        for (int c = 0; c < c_n; ++c) {
            const float* p = x.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            const float* q = gy.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            float* o = gx.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            float direct = static_cast<float>(gamma.value[c] * n[c] + 1.0);
            double coef = g[c] > 0.0 ? (a[c] / denom - sum_an / (c_n * denom)) / g[c] : 0.0;
            for (int64_t i = 0; i < plane; ++i)
                o[i] = q[i] * direct + static_cast<float>(coef) * p[i];
        }
    }
    return gx;
}

Linear::Linear(int in_f, int out_f, Rng& rng) : in_features(in_f), out_features(out_f) {
    float std = std::sqrt(2.0f / static_cast<float>(in_f));
    weight = Param(Tensor::randn({out_f, in_f}, rng, std));
    bias = Param(Tensor::zeros({out_f}));
}

Tensor Linear::forward(const Tensor& x, bool grad_mode) {
    if (x.ndim() != 2 || x.shape[1] != in_features)
        throw ShapeError("Linear: expected [B," + std::to_string(in_features) + "], got " + x.shape_str());
    if (grad_mode) saved_input_ = x;
    const int batch = x.shape[0];
    Tensor out({batch, out_features});
    CMapMat xm(x.data.data(), batch, in_features);
    CMapMat wm(weight.value.data.data(), out_features, in_features);
    MapMat om(out.data.data(), batch, out_features);
    om.noalias() = xm * wm.transpose();
    for (int b = 0; b < batch; ++b)
        for (int o = 0; o < out_features; ++o) om(b, o) += bias.value[o];
    return out;
}

Tensor Linear::backward(const Tensor& gy) {
    const Tensor& x = saved_input_;
    const int batch = x.shape[0];
    Tensor gx(x.shape);
    CMapMat xm(x.data.data(), batch, in_features);
    CMapMat gym(gy.data.data(), batch, out_features);
    MapMat gwm(weight.grad.data.data(), out_features, in_features);
    gwm.noalias() += gym.transpose() * xm;
    for (int o = 0; o < out_features; ++o) bias.grad[o] += gym.col(o).sum();
    CMapMat wm(weight.value.data.data(), out_features, in_features);
    MapMat gxm(gx.data.data(), batch, in_features);
    gxm.noalias() = gym * wm;
    return gx;
}

Tensor upsample_bilinear(const Tensor& x, int out_h, int out_w) {
    const int batch = x.shape[0], c_n = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (h == out_h && w == out_w) return x;
    Tensor out({batch, c_n, out_h, out_w});
    const float sy = static_cast<float>(h) / out_h;
    const float sx = static_cast<float>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        float fy = std::max(0.0f, (oy + 0.5f) * sy - 0.5f);
        int y0 = std::min(static_cast<int>(fy), h - 1);
        int y1 = std::min(y0 + 1, h - 1);
        float wy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            float fx = std::max(0.0f, (ox + 0.5f) * sx - 0.5f);
            int x0 = std::min(static_cast<int>(fx), w - 1);
            int x1 = std::min(x0 + 1, w - 1);
            float wx = fx - x0;
            for (int b = 0; b < batch; ++b) {
                for (int c = 0; c < c_n; ++c) {
                    const float* p = x.data.data() + (static_cast<int64_t>(b) * c_n + c) * h * w;
                    float v = (1 - wy) * ((1 - wx) * p[y0 * w + x0] + wx * p[y0 * w + x1]) +
                              wy * ((1 - wx) * p[y1 * w + x0] + wx * p[y1 * w + x1]);
                    out.at(b, c, oy, ox) = v;
                }
            }
        }
    }
    return out;
}

Tensor upsample_bilinear_backward(const Tensor& gy, int in_h, int in_w) {
    const int batch = gy.shape[0], c_n = gy.shape[1], oh = gy.shape[2], ow = gy.shape[3];
    if (oh == in_h && ow == in_w) return gy;
    Tensor gx({batch, c_n, in_h, in_w});
    const float sy = static_cast<float>(in_h) / oh;
    const float sx = static_cast<float>(in_w) / ow;
    for (int oy = 0; oy < oh; ++oy) {
        float fy = std::max(0.0f, (oy + 0.5f) * sy - 0.5f);
        int y0 = std::min(static_cast<int>(fy), in_h - 1);
        int y1 = std::min(y0 + 1, in_h - 1);
        float wy = fy - y0;
        for (int ox = 0; ox < ow; ++ox) {
            float fx = std::max(0.0f, (ox + 0.5f) * sx - 0.5f);
            int x0 = std::min(static_cast<int>(fx), in_w - 1);
            int x1 = std::min(x0 + 1, in_w - 1);
            float wx = fx - x0;
            for (int b = 0; b < batch; ++b) {
                for (int c = 0; c < c_n; ++c) {
                    float g = gy.at(b, c, oy, ox);
                    float* p = gx.data.data() + (static_cast<int64_t>(b) * c_n + c) * in_h * in_w;
                    p[y0 * in_w + x0] += (1 - wy) * (1 - wx) * g;
                    p[y0 * in_w + x1] += (1 - wy) * wx * g;
                    p[y1 * in_w + x0] += wy * (1 - wx) * g;
                    p[y1 * in_w + x1] += wy * wx * g;
                }
            }
        }
    }
    return gx;
}

Tensor global_avg_pool(const Tensor& x) {
    const int batch = x.shape[0], c_n = x.shape[1];
    const int64_t plane = static_cast<int64_t>(x.shape[2]) * x.shape[3];
    Tensor out({batch, c_n});
    for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < c_n; ++c) {
            const float* p = x.data.data() + (static_cast<int64_t>(b) * c_n + c) * plane;
            double s = 0.0;
            for (int64_t i = 0; i < plane; ++i) s += p[i];
            out.at(b, c) = static_cast<float>(s / plane);
        }
    }
    return out;
}

Tensor global_avg_pool_backward(const Tensor& gy, int h, int w) {
    const int batch = gy.shape[0], c_n = gy.shape[1];
    Tensor gx({batch, c_n, h, w});
    const float inv = 1.0f / static_cast<float>(h * w);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < c_n; ++c) {
            float g = gy.at(b, c) * inv;
            float* p = gx.data.data() + (static_cast<int64_t>(b) * c_n + c) * h * w;
            for (int i = 0; i < h * w; ++i) p[i] = g;
        }
    return gx;
}

double softmax_ce_loss(const Tensor& logits, const std::vector<int>& labels, Tensor* grad) {
    const int batch = logits.shape[0], k = logits.shape[1];
    if (static_cast<int>(labels.size()) != batch)
        throw ShapeError("softmax_ce_loss: label count != batch");
    if (grad) *grad = Tensor(logits.shape);
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        const float* row = logits.data.data() + static_cast<int64_t>(b) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
        double logz = std::log(z) + mx;
        total += logz - row[labels[b]];
        if (grad) {
            float* g = grad->data.data() + static_cast<int64_t>(b) * k;
            for (int j = 0; j < k; ++j) {
                double p = std::exp(static_cast<double>(row[j]) - logz);
                g[j] = static_cast<float>((p - (j == labels[b] ? 1.0 : 0.0)) / batch);
            }
        }
    }
    return total / batch;
}

double softmax_ce_loss_dense(const Tensor& logits, const std::vector<int>& labels, Tensor* grad) {
    const int batch = logits.shape[0], k = logits.shape[1];
    const int64_t plane = static_cast<int64_t>(logits.shape[2]) * logits.shape[3];
    if (static_cast<int64_t>(labels.size()) != batch * plane)
        throw ShapeError("softmax_ce_loss_dense: label count != batch*H*W");
    if (grad) *grad = Tensor(logits.shape);
    const double inv_n = 1.0 / static_cast<double>(batch * plane);
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        const float* base = logits.data.data() + static_cast<int64_t>(b) * k * plane;
        for (int64_t i = 0; i < plane; ++i) {
            int label = labels[static_cast<size_t>(b) * plane + i];
            float mx = base[i];
            for (int j = 1; j < k; ++j) mx = std::max(mx, base[j * plane + i]);
            double z = 0.0;
            for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(base[j * plane + i]) - mx);
            double logz = std::log(z) + mx;
            total += logz - base[label * plane + i];
            if (grad) {
                float* g = grad->data.data() + static_cast<int64_t>(b) * k * plane;
                for (int j = 0; j < k; ++j) {
                    double p = std::exp(static_cast<double>(base[j * plane + i]) - logz);
                    g[j * plane + i] = static_cast<float>((p - (j == label ? 1.0 : 0.0)) * inv_n);
                }
            }
        }
    }
    return total * inv_n;
}

double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad) {
    if (!pred.same_shape(target)) throw ShapeError("mse_loss: shape mismatch");
    if (grad) *grad = Tensor(pred.shape);
    const int64_t n = pred.numel();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double d = static_cast<double>(pred[i]) - target[i];
        total += d * d;
        if (grad) (*grad)[i] = static_cast<float>(2.0 * d / n);
    }
    return total / n;
}

Adam::Adam(std::vector<Param*> params, float learn_rate, float beta1, float beta2, float eps)
    : lr(learn_rate), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
        m_.emplace_back(Tensor(p->value.shape));
        v_.emplace_back(Tensor(p->value.shape));
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        float* w = p.value.data.data();
        const float* g = p.grad.data.data();
        float* m = m_[i].data.data();
        float* v = v_[i].data.data();
        const int64_t n = p.value.numel();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = beta1_ * m[j] + (1.0f - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0f - beta2_) * g[j] * g[j];
            double mh = m[j] / bc1;
            double vh = v[j] / bc2;
            w[j] -= static_cast<float>(lr * mh / (std::sqrt(vh) + eps_));
        }
    }
}

}  // namespace eos::nn
