#ifndef ECGICD_MODELS_HPP
#define ECGICD_MODELS_HPP

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgicd/nn.hpp"
#include "ecgicd/s4.hpp"
#include "ecgicd/tensor.hpp"

namespace ecgicd::models {

enum class Family { XResNet1d, S4 };

struct NonFiniteGradient : std::runtime_error {
    NonFiniteGradient() : std::runtime_error("non-finite gradient") {}
};

/// Architecture description; shapes of every parameter tensor are
/// derivable from this alone.
struct ModelConfig {
    Family family = Family::S4;
    std::size_t in_leads = 12;
    std::size_t n_labels = 8;
    std::size_t input_len = 250;
    std::uint64_t seed = 0;
    double dropout = 0.1;

    // S4
    std::size_t n_layers = 4;
    std::size_t d_model = 512;
    std::size_t d_state = 8;
    bool bidirectional = true;

    // XResNet1d
    std::vector<std::size_t> stage_depths = {3, 4, 6, 3};
    std::size_t base_width = 64;

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    /// Named presets: paper-s4, desk-s4, tiny-s4, paper-xresnet1d50,
    /// desk-xresnet1d50, tiny-xresnet1d50. Desk/tiny shrink widths only;
    /// layer topology stays as published.
    static ModelConfig preset(const std::string& name);
};

template <typename T>
class Model {
public:
    virtual ~Model() = default;
    virtual void forward(const Act<T>& x, Mat<T>& logits, bool train) = 0;
    virtual void backward(const Mat<T>& dlogits) = 0;
    virtual std::vector<Param<T>*> params() = 0;
    virtual const ModelConfig& config() const = 0;
    virtual std::uint64_t warnings() const { return 0; }

    void zero_grads() {
        for (auto* p : params()) p->zero_grad();
    }
};

// ---------------------------------------------------------------------
// S4 classifier: pointwise encoder, bidirectional S4 blocks, mean
// pooling over time, linear head.
// ---------------------------------------------------------------------
template <typename T>
class S4Model final : public Model<T> {
public:
    explicit S4Model(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        DetRng rng(cfg.seed);
        encoder_ = Conv1d<T>("encoder", cfg.in_leads, cfg.d_model, 1, 1, 0, rng);
        blocks_.reserve(cfg.n_layers);
        for (std::size_t i = 0; i < cfg.n_layers; ++i)
            blocks_.emplace_back(std::make_unique<S4Block<T>>("block" + std::to_string(i), cfg.d_model,
                                                              cfg.d_state, cfg.bidirectional,
                                                              cfg.dropout, rng));
        head_ = Linear<T>("head", cfg.d_model, cfg.n_labels, rng);
    }

    void forward(const Act<T>& x, Mat<T>& logits, bool train) override {
        if (x.c != cfg_.in_leads) throw ShapeMismatch("model expects " + std::to_string(cfg_.in_leads) + " leads");
        Act<T> h;
        encoder_.forward(x, h);
        for (auto& block : blocks_) {
            Act<T> next;
            block->forward(h, next, train);
            h = std::move(next);
        }
        pool_.forward(h, pooled_);
        head_.forward(pooled_, logits);
    }

    void backward(const Mat<T>& dlogits) override {
        Mat<T> gpool;
        head_.backward(dlogits, gpool);
        Act<T> gh;
        pool_.backward(gpool, gh);
        for (std::size_t i = blocks_.size(); i-- > 0;) {
            Act<T> gprev;
            blocks_[i]->backward(gh, gprev);
            gh = std::move(gprev);
        }
        Act<T> gx;
        encoder_.backward(gh, gx);
    }

    std::vector<Param<T>*> params() override {
        std::vector<Param<T>*> out;
        encoder_.params(out);
        for (auto& block : blocks_) block->params(out);
        head_.params(out);
        return out;
    }

    const ModelConfig& config() const override { return cfg_; }
    std::uint64_t warnings() const override {
        std::uint64_t n = 0;
        for (const auto& block : blocks_) n += block->unstable_pole_warnings();
        return n;
    }

    S4Block<T>& block(std::size_t i) { return *blocks_[i]; }

private:
    ModelConfig cfg_;
    Conv1d<T> encoder_;
    std::vector<std::unique_ptr<S4Block<T>>> blocks_;
    GlobalMeanPool<T> pool_;
    Mat<T> pooled_;
    Linear<T> head_;
};

// ---------------------------------------------------------------------
// XResNet1d: 3-conv stem (k=5, first stride 2), max pool, bottleneck
// stages with depths per config, mean pooling, linear head.
// ---------------------------------------------------------------------
template <typename T>
class BottleneckBlock {
public:
    BottleneckBlock(const std::string& name, std::size_t in_c, std::size_t inner, std::size_t stride,
                    DetRng& rng)
        : project_(in_c != inner * 4 || stride != 1) {
        const std::size_t out_c = inner * 4;
        conv1_ = Conv1d<T>(name + ".conv1", in_c, inner, 1, 1, 0, rng);
        bn1_ = BatchNorm1d<T>(name + ".bn1", inner);
        conv2_ = Conv1d<T>(name + ".conv2", inner, inner, 3, stride, 1, rng);
        bn2_ = BatchNorm1d<T>(name + ".bn2", inner);
        conv3_ = Conv1d<T>(name + ".conv3", inner, out_c, 1, 1, 0, rng);
        bn3_ = BatchNorm1d<T>(name + ".bn3", out_c);
        bn3_.zero_init_gamma();  // residual branch starts as identity
        if (project_) {
            proj_conv_ = Conv1d<T>(name + ".proj", in_c, out_c, 1, stride, 0, rng);
            proj_bn_ = BatchNorm1d<T>(name + ".proj_bn", out_c);
        }
    }

    void forward(const Act<T>& in, Act<T>& out, bool train) {
        Act<T> a, b;
        conv1_.forward(in, a);
        bn1_.forward(a, b, train);
        relu1_.forward(b, a);
        conv2_.forward(a, b);
        bn2_.forward(b, a, train);
        relu2_.forward(a, b);
        conv3_.forward(b, a);
        bn3_.forward(a, main_, train);
        if (project_) {
            proj_conv_.forward(in, a);
            proj_bn_.forward(a, skip_, train);
        } else {
            skip_ = in;
        }
        Act<T> sum = main_;
        for (std::size_t i = 0; i < sum.v.size(); ++i) sum.v[i] += skip_.v[i];
        relu_out_.forward(sum, out);
    }

    void backward(const Act<T>& gout, Act<T>& gin) {
        Act<T> gsum;
        relu_out_.backward(gout, gsum);
        Act<T> gskip;
        if (project_) {
            Act<T> t;
            proj_bn_.backward(gsum, t);
            proj_conv_.backward(t, gskip);
        } else {
            gskip = gsum;
        }
        Act<T> a, b;
        bn3_.backward(gsum, a);
        conv3_.backward(a, b);
        relu2_.backward(b, a);
        bn2_.backward(a, b);
        conv2_.backward(b, a);
        relu1_.backward(a, b);
        bn1_.backward(b, a);
        conv1_.backward(a, gin);
        for (std::size_t i = 0; i < gin.v.size(); ++i) gin.v[i] += gskip.v[i];
    }

    void params(std::vector<Param<T>*>& out) {
        conv1_.params(out);
        bn1_.params(out);
        conv2_.params(out);
        bn2_.params(out);
        conv3_.params(out);
        bn3_.params(out);
        if (project_) {
            proj_conv_.params(out);
            proj_bn_.params(out);
        }
    }

private:
    bool project_ = false;
    Conv1d<T> conv1_, conv2_, conv3_, proj_conv_;
    BatchNorm1d<T> bn1_, bn2_, bn3_, proj_bn_;
    ReLU<T> relu1_, relu2_, relu_out_;
    Act<T> main_, skip_;
};

template <typename T>
class XResNet1d final : public Model<T> {
public:
    explicit XResNet1d(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        DetRng rng(cfg.seed);
        const std::size_t w = cfg.base_width;
        stem_conv_[0] = Conv1d<T>("stem.conv0", cfg.in_leads, w / 2, 5, 2, 2, rng);
        stem_bn_[0] = BatchNorm1d<T>("stem.bn0", w / 2);
        stem_conv_[1] = Conv1d<T>("stem.conv1", w / 2, w / 2, 5, 1, 2, rng);
        stem_bn_[1] = BatchNorm1d<T>("stem.bn1", w / 2);
        stem_conv_[2] = Conv1d<T>("stem.conv2", w / 2, w, 5, 1, 2, rng);
        stem_bn_[2] = BatchNorm1d<T>("stem.bn2", w);
        pool_ = MaxPool1d<T>(3, 2, 1);

        std::size_t in_c = w;
        for (std::size_t s = 0; s < cfg.stage_depths.size(); ++s) {
            const std::size_t inner = w << s;
            for (std::size_t d = 0; d < cfg.stage_depths[s]; ++d) {
                const std::size_t stride = (s > 0 && d == 0) ? 2 : 1;
                blocks_.emplace_back(std::make_unique<BottleneckBlock<T>>(
                    "stage" + std::to_string(s + 1) + ".block" + std::to_string(d), in_c, inner,
                    stride, rng));
                in_c = inner * 4;
            }
        }
        drop_ = Dropout<T>(cfg.dropout, rng.u64());
        head_ = Linear<T>("head", in_c, cfg.n_labels, rng);
    }

    /// Pre-pool feature map, exposed for the pooling-mass test.
    void forward_features(const Act<T>& x, Act<T>& feats, bool train) {
        Act<T> a, b;
        stem_conv_[0].forward(x, a);
        stem_bn_[0].forward(a, b, train);
        stem_relu_[0].forward(b, a);
        stem_conv_[1].forward(a, b);
        stem_bn_[1].forward(b, a, train);
        stem_relu_[1].forward(a, b);
        stem_conv_[2].forward(b, a);
        stem_bn_[2].forward(a, b, train);
        stem_relu_[2].forward(b, a);
        pool_.forward(a, feats);
        for (auto& block : blocks_) {
            Act<T> next;
            block->forward(feats, next, train);
            feats = std::move(next);
        }
    }

    void forward(const Act<T>& x, Mat<T>& logits, bool train) override {
        Act<T> feats;
        forward_features(x, feats, train);
        gap_.forward(feats, pooled_);
        Mat<T> dropped = pooled_;
        if (train) {
            Act<T> tmp(pooled_.n, pooled_.f, 1), tmp_out;
            tmp.v = pooled_.v;
            drop_.forward(tmp, tmp_out, train);
            dropped.v = tmp_out.v;
            drop_active_ = true;
        } else {
            drop_active_ = false;
        }
        head_.forward(dropped, logits);
    }

    void backward(const Mat<T>& dlogits) override {
        Mat<T> gpool;
        head_.backward(dlogits, gpool);
        if (drop_active_) {
            Act<T> tmp(gpool.n, gpool.f, 1), tmp_out;
            tmp.v = gpool.v;
            drop_.backward(tmp, tmp_out);
            gpool.v = tmp_out.v;
        }
        Act<T> gfeats;
        gap_.backward(gpool, gfeats);
        for (std::size_t i = blocks_.size(); i-- > 0;) {
            Act<T> gprev;
            blocks_[i]->backward(gfeats, gprev);
            gfeats = std::move(gprev);
        }
        Act<T> a, b;
        stem_relu_[2].backward(gfeats2_helper(gfeats), a);
        stem_bn_[2].backward(a, b);
        stem_conv_[2].backward(b, a);
        stem_relu_[1].backward(a, b);
        stem_bn_[1].backward(b, a);
        stem_conv_[1].backward(a, b);
        stem_relu_[0].backward(b, a);
        stem_bn_[0].backward(a, b);
        stem_conv_[0].backward(b, a);
    }

    std::vector<Param<T>*> params() override {
        std::vector<Param<T>*> out;
        for (int i = 0; i < 3; ++i) {
            stem_conv_[i].params(out);
            stem_bn_[i].params(out);
        }
        for (auto& block : blocks_) block->params(out);
        head_.params(out);
        return out;
    }

    const ModelConfig& config() const override { return cfg_; }

private:
    // MaxPool backward sits between the deepest stem ReLU and the blocks.
    Act<T> gfeats2_helper(const Act<T>& gfeats) {
        Act<T> g;
        pool_.backward(gfeats, g);
        return g;
    }

    ModelConfig cfg_;
    Conv1d<T> stem_conv_[3];
    BatchNorm1d<T> stem_bn_[3];
    ReLU<T> stem_relu_[3];
    MaxPool1d<T> pool_;
    std::vector<std::unique_ptr<BottleneckBlock<T>>> blocks_;
    GlobalMeanPool<T> gap_;
    Mat<T> pooled_;
    Dropout<T> drop_;
    bool drop_active_ = false;
    Linear<T> head_;
};

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& cfg) {
    if (cfg.family == Family::S4) return std::make_unique<S4Model<T>>(cfg);
    return std::make_unique<XResNet1d<T>>(cfg);
}

// ---------------------------------------------------------------------
// Binary cross-entropy over logits, mean over batch x labels, in the
// stable softplus form.
// ---------------------------------------------------------------------
template <typename T>
T bce_with_logits(const Mat<T>& logits, const Mat<T>& targets) {
    if (logits.n != targets.n || logits.f != targets.f) throw ShapeMismatch("loss inputs");
    long double acc = 0;
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        const T z = logits.v[i];
        const T y = targets.v[i];
        const T abs_z = z < T(0) ? -z : z;
        acc += (z > T(0) ? z : T(0)) - z * y + std::log1p(std::exp(-abs_z));
    }
    return static_cast<T>(acc / static_cast<long double>(logits.v.size()));
}

template <typename T>
void bce_with_logits_grad(const Mat<T>& logits, const Mat<T>& targets, Mat<T>& grad) {
    grad = Mat<T>(logits.n, logits.f);
    const T inv = T(1) / static_cast<T>(logits.v.size());
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        const T z = logits.v[i];
        const T sig = T(1) / (T(1) + std::exp(-z));
        grad.v[i] = (sig - targets.v[i]) * inv;
    }
}

template <typename T>
T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

/// Loss gradient wrt every parameter, left in the params' .g slots.
/// Throws NonFiniteGradient if any entry is not finite.
template <typename T>
T model_gradient(Model<T>& model, const Act<T>& batch, const Mat<T>& targets, bool train = true) {
    model.zero_grads();
    Mat<T> logits;
    model.forward(batch, logits, train);
    const T loss = bce_with_logits(logits, targets);
    Mat<T> dlogits;
    bce_with_logits_grad(logits, targets, dlogits);
    model.backward(dlogits);
    for (auto* p : model.params()) {
        if (!p->trainable) continue;
        for (const T g : p->g.v)
            if (!std::isfinite(g)) throw NonFiniteGradient();
    }
    return loss;
}

}  // namespace ecgicd::models

#endif
