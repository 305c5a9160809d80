#pragma once

// The three forecasters: AOI CNN-LSTM, reconstruction CNN-LSTM, and ConvLSTM.
// Forward rollouts retain per-step caches (train mode only) so backward can
// run full BPTT through the autoregressive prediction phase.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "firecast/layers.hpp"
#include "firecast/model_spec.hpp"
#include "firecast/tensor.hpp"

namespace firecast {

template <typename T>
using ParamVisitor =
    std::function<void(const std::string& name, Tensor<T>& value, Tensor<T>* grad, bool trainable)>;

// ---------------------------------------------------------------------------
// parameterized layers

template <typename T>
struct Conv2dLayer {
    int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0;
    Tensor<T> w, b, gw, gb;

    void build(int ic, int oc, int kk, int s, int p) {
        in_c = ic;
        out_c = oc;
        k = kk;
        stride = s;
        pad = p;
        w = Tensor<T>({oc, ic, kk, kk});
        b = Tensor<T>({oc});
        gw = Tensor<T>(w.shape());
        gb = Tensor<T>(b.shape());
    }
    void init(std::mt19937_64& rng) {
        fill_normal(w, rng, std::sqrt(2.0 / (in_c * k * k)));
        b.fill(T(0));
    }
    Tensor<T> forward(const Tensor<T>& x) const { return conv2d_fwd(x, w, b, stride, pad); }
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy) {
        return conv2d_bwd(x, w, gy, stride, pad, gw, gb);
    }
    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(prefix + ".w", w, &gw, true);
        fn(prefix + ".b", b, &gb, true);
    }
};

template <typename T>
struct BNLayer {
    Tensor<T> gamma, beta, ggamma, gbeta, rmean, rvar;

    void build(int c) {
        gamma = Tensor<T>({c});
        beta = Tensor<T>({c});
        ggamma = Tensor<T>({c});
        gbeta = Tensor<T>({c});
        rmean = Tensor<T>({c});
        rvar = Tensor<T>({c});
        gamma.fill(T(1));
        rvar.fill(T(1));
    }
    Tensor<T> forward(const Tensor<T>& x, bool train, BNCache<T>* cache) {
        return batchnorm2d_fwd(x, gamma, beta, train, rmean, rvar, cache);
    }
    Tensor<T> backward(const Tensor<T>& gy, const BNCache<T>& cache) {
        return batchnorm2d_bwd(gy, gamma, cache, ggamma, gbeta);
    }
    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(prefix + ".gamma", gamma, &ggamma, true);
        fn(prefix + ".beta", beta, &gbeta, true);
        fn(prefix + ".running_mean", rmean, nullptr, false);
        fn(prefix + ".running_var", rvar, nullptr, false);
    }
};

template <typename T>
struct LinearLayer {
    Tensor<T> w, b, gw, gb;

    void build(int out, int in) {
        w = Tensor<T>({out, in});
        b = Tensor<T>({out});
        gw = Tensor<T>(w.shape());
        gb = Tensor<T>(b.shape());
    }
    void init(std::mt19937_64& rng) {
        fill_normal(w, rng, std::sqrt(2.0 / w.dim(1)));
        b.fill(T(0));
    }
    Tensor<T> forward(const Tensor<T>& x) const { return linear_fwd(x, w, b); }
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy) {
        return linear_bwd(x, w, gy, gw, gb);
    }
    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(prefix + ".w", w, &gw, true);
        fn(prefix + ".b", b, &gb, true);
    }
};

template <typename T>
struct LstmLayer {
    Tensor<T> wx, wh, bx, bh, gwx, gwh, gbx, gbh;

    void build(int input, int hidden) {
        wx = Tensor<T>({4 * hidden, input});
        wh = Tensor<T>({4 * hidden, hidden});
        bx = Tensor<T>({4 * hidden});
        bh = Tensor<T>({4 * hidden});
        gwx = Tensor<T>(wx.shape());
        gwh = Tensor<T>(wh.shape());
        gbx = Tensor<T>(bx.shape());
        gbh = Tensor<T>(bh.shape());
    }
    void init(std::mt19937_64& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(wh.dim(1)));
        fill_uniform(wx, rng, -bound, bound);
        fill_uniform(wh, rng, -bound, bound);
        fill_uniform(bx, rng, -bound, bound);
        fill_uniform(bh, rng, -bound, bound);
    }
    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(prefix + ".wx", wx, &gwx, true);
        fn(prefix + ".wh", wh, &gwh, true);
        fn(prefix + ".bx", bx, &gbx, true);
        fn(prefix + ".bh", bh, &gbh, true);
    }
};

template <typename T>
struct ConvLstmLayer {
    Tensor<T> wx, wh, b, gwx, gwh, gb;

    void build(int in_c, int hidden, int k) {
        wx = Tensor<T>({4 * hidden, in_c, k, k});
        wh = Tensor<T>({4 * hidden, hidden, k, k});
        b = Tensor<T>({4 * hidden});
        gwx = Tensor<T>(wx.shape());
        gwh = Tensor<T>(wh.shape());
        gb = Tensor<T>(b.shape());
    }
    void init(std::mt19937_64& rng) {
        const int k = wx.dim(2);
        fill_normal(wx, rng, std::sqrt(1.0 / (wx.dim(1) * k * k)));
        fill_normal(wh, rng, std::sqrt(1.0 / (wh.dim(1) * k * k)));
        b.fill(T(0));
    }
    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(prefix + ".wx", wx, &gwx, true);
        fn(prefix + ".wh", wh, &gwh, true);
        fn(prefix + ".b", b, &gb, true);
    }
};

// ---------------------------------------------------------------------------
// shared encoder stack: [conv s2 -> BN -> ReLU -> pool 3 s2] x blocks, flatten

template <typename T>
struct EncoderNet {
    std::vector<Conv2dLayer<T>> convs;
    std::vector<BNLayer<T>> bns;

    struct Cache {
        std::vector<Tensor<T>> conv_in;
        std::vector<BNCache<T>> bn;
        std::vector<Tensor<T>> bn_out;
        std::vector<Tensor<T>> relu_out;
        std::vector<PoolCache<T>> pool;
    };

    void build(const ModelSpec& spec) {
        int c_in = 3;
        for (const auto& blk : spec.encoder) {
            Conv2dLayer<T> conv;
            conv.build(c_in, blk.out_c, blk.kernel, 2, 0);
            convs.push_back(std::move(conv));
            BNLayer<T> bn;
            bn.build(blk.out_c);
            bns.push_back(std::move(bn));
            c_in = blk.out_c;
        }
    }
    void init(std::mt19937_64& rng) {
        for (auto& c : convs) c.init(rng);
    }

    // Returns the flattened feature vector; fills `cache` when train is set.
    Tensor<T> forward(const Tensor<T>& frame, bool train, Cache* cache) {
        Tensor<T> x = frame;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            if (cache) cache->conv_in.push_back(x);
            Tensor<T> y = convs[i].forward(x);
            BNCache<T> bnc;
            y = bns[i].forward(y, train, cache ? &bnc : nullptr);
            if (cache) {
                cache->bn.push_back(std::move(bnc));
                cache->bn_out.push_back(y);
            }
            y = relu_fwd(y);
            if (cache) cache->relu_out.push_back(y);
            PoolCache<T> pc;
            x = maxpool2d_fwd(y, 3, 2, pc);
            if (cache) cache->pool.push_back(std::move(pc));
        }
        Tensor<T> flat({static_cast<int>(x.numel())});
        std::copy(x.data(), x.data() + x.numel(), flat.data());
        last_shape_ = x.shape();
        return flat;
    }

    void backward(const Cache& cache, const Tensor<T>& gflat) {
        Tensor<T> g(last_shape_);
        std::copy(gflat.data(), gflat.data() + gflat.numel(), g.data());
        for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
            const std::size_t si = static_cast<std::size_t>(i);
            g = maxpool2d_bwd(g, cache.pool[si], cache.relu_out[si].shape());
            g = relu_bwd(cache.bn_out[si], g);
            g = bns[si].backward(g, cache.bn[si]);
            g = convs[si].backward(cache.conv_in[si], g);
        }
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        for (std::size_t i = 0; i < convs.size(); ++i) {
            convs[i].visit(prefix + ".conv" + std::to_string(i), fn);
            bns[i].visit(prefix + ".bn" + std::to_string(i), fn);
        }
    }

  private:
    std::vector<int> last_shape_;
};

// ---------------------------------------------------------------------------
// AOI CNN-LSTM

template <typename T>
class AoiModel {
  public:
    static constexpr bool kMapOutput = false;
    using Output = Tensor<T>; // T_pred probabilities

    explicit AoiModel(const ModelSpec& spec) : spec_(spec) {
        enc_.build(spec);
        fc1_.build(spec.lstm_input, encoder_flat_dim(spec));
        lstm_.build(spec.lstm_input, spec.hidden);
        fc2_.build(spec.lstm_input, spec.hidden);
        dec1_.build(spec.dec_hidden, spec.hidden);
        dec2_.build(1, spec.dec_hidden);
    }

    void init(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        enc_.init(rng);
        fc1_.init(rng);
        lstm_.init(rng);
        fc2_.init(rng);
        dec1_.init(rng);
        dec2_.init(rng);
    }

    const ModelSpec& spec() const { return spec_; }

    Output rollout(const std::vector<Tensor<T>>& frames, bool train) {
        if (static_cast<int>(frames.size()) != spec_.t_obs)
            throw ShapeError("aoi_rollout: expected exactly t_obs observed frames");
        trace_ = Trace{};
        Tensor<T> h({spec_.hidden}), c({spec_.hidden});
        for (int t = 0; t < spec_.t_obs; ++t) {
            typename EncoderNet<T>::Cache ec;
            Tensor<T> feat = enc_.forward(frames[static_cast<std::size_t>(t)], train, train ? &ec : nullptr);
            Tensor<T> z = fc1_.forward(feat);
            LstmCache<T> lc;
            Tensor<T> h2, c2;
            lstm_cell_fwd(z, h, c, lstm_.wx, lstm_.wh, lstm_.bx, lstm_.bh, h2, c2, lc);
            h = h2;
            c = c2;
            if (train) {
                trace_.enc.push_back(std::move(ec));
                trace_.feats.push_back(std::move(feat));
                trace_.lstm.push_back(std::move(lc));
            }
        }
        Output probs({spec_.t_pred});
        for (int s = 0; s < spec_.t_pred; ++s) {
            Tensor<T> z = fc2_.forward(h);
            LstmCache<T> lc;
            Tensor<T> h2, c2;
            lstm_cell_fwd(z, h, c, lstm_.wx, lstm_.wh, lstm_.bx, lstm_.bh, h2, c2, lc);
            h = h2;
            c = c2;
            Tensor<T> d_pre = dec1_.forward(h);
            Tensor<T> d = relu_fwd(d_pre);
            Tensor<T> logit = dec2_.forward(d);
            Tensor<T> p = sigmoid_fwd(logit);
            probs[static_cast<std::size_t>(s)] = p[0];
            if (train) {
                trace_.lstm.push_back(std::move(lc));
                trace_.dec_pre.push_back(std::move(d_pre));
                trace_.dec_hidden.push_back(std::move(d));
                trace_.p.push_back(p[0]);
            }
        }
        return probs;
    }

    // gprobs: dLoss/dprob per prediction step. Must follow a train-mode rollout.
    void backward(const Tensor<T>& gprobs) {
        Tensor<T> dh({spec_.hidden}), dc({spec_.hidden});
        for (int s = spec_.t_pred - 1; s >= 0; --s) {
            const std::size_t ss = static_cast<std::size_t>(s);
            // decoder branch at h_s
            Tensor<T> gp({1});
            const T p = trace_.p[ss];
            gp[0] = gprobs[ss] * p * (T(1) - p);
            Tensor<T> gd = dec2_.backward(trace_.dec_hidden[ss], gp);
            gd = relu_bwd(trace_.dec_pre[ss], gd);
            const LstmCache<T>& lc = trace_.lstm[static_cast<std::size_t>(spec_.t_obs + s)];
            // dec1 input is h_s, the output of this LSTM step
            Tensor<T> gh_dec = dec1_.backward(lstm_h_out(lc), gd);
            dh.add_(gh_dec);
            LstmGrads<T> g = lstm_cell_bwd(lc, lstm_.wx, lstm_.wh, dh, dc, lstm_.gwx, lstm_.gwh,
                                           lstm_.gbx, lstm_.gbh);
            // z_s = fc2(h_{s-1}); both paths feed dh for the previous step
            Tensor<T> gh_fc2 = fc2_.backward(lc.h_prev, g.gx);
            dh = g.gh_prev;
            dh.add_(gh_fc2);
            dc = g.gc_prev;
        }
        for (int t = spec_.t_obs - 1; t >= 0; --t) {
            const std::size_t st = static_cast<std::size_t>(t);
            const LstmCache<T>& lc = trace_.lstm[st];
            LstmGrads<T> g = lstm_cell_bwd(lc, lstm_.wx, lstm_.wh, dh, dc, lstm_.gwx, lstm_.gwh,
                                           lstm_.gbx, lstm_.gbh);
            dh = g.gh_prev;
            dc = g.gc_prev;
            Tensor<T> gfeat = fc1_.backward(trace_.feats[st], g.gx);
            enc_.backward(trace_.enc[st], gfeat);
        }
    }

    void visit_params(const ParamVisitor<T>& fn) {
        enc_.visit("encoder", fn);
        fc1_.visit("fc1", fn);
        lstm_.visit("lstm", fn);
        fc2_.visit("fc2", fn);
        dec1_.visit("dec1", fn);
        dec2_.visit("dec2", fn);
    }

    void zero_grads() {
        visit_params([](const std::string&, Tensor<T>&, Tensor<T>* g, bool) {
            if (g) g->fill(T(0));
        });
    }

  private:
    // h_s was consumed as h_prev of step s+1 except at the last step; recompute
    // it from the cache instead of tracking a separate vector.
    static Tensor<T> lstm_h_out(const LstmCache<T>& lc) {
        Tensor<T> h(lc.c.shape());
        for (std::size_t j = 0; j < h.numel(); ++j) h[j] = lc.o[j] * lc.tanh_c[j];
        return h;
    }

    struct Trace {
        std::vector<typename EncoderNet<T>::Cache> enc;
        std::vector<Tensor<T>> feats;
        std::vector<LstmCache<T>> lstm;
        std::vector<Tensor<T>> dec_pre, dec_hidden;
        std::vector<T> p;
    };

    ModelSpec spec_;
    EncoderNet<T> enc_;
    LinearLayer<T> fc1_;
    LstmLayer<T> lstm_;
    LinearLayer<T> fc2_;
    LinearLayer<T> dec1_, dec2_;
    Trace trace_;
};

// ---------------------------------------------------------------------------
// reconstruction CNN-LSTM: same trunk, map decoder

template <typename T>
class ReconModel {
  public:
    static constexpr bool kMapOutput = true;
    using Output = std::vector<Tensor<T>>; // T_pred maps of H x W

    explicit ReconModel(const ModelSpec& spec) : spec_(spec) {
        enc_.build(spec);
        fc1_.build(spec.lstm_input, encoder_flat_dim(spec));
        lstm_.build(spec.lstm_input, spec.hidden);
        fc2_.build(spec.lstm_input, spec.hidden);
        fcmap_.build(spec.recon_base * 4, spec.hidden);
        int c_in = spec.recon_base;
        for (int c : spec.recon_channels) {
            Conv2dLayer<T> conv;
            conv.build(c_in, c, 3, 1, 1);
            dec_convs_.push_back(std::move(conv));
            BNLayer<T> bn;
            bn.build(c);
            dec_bns_.push_back(std::move(bn));
            c_in = c;
        }
        head_.build(c_in, 1, 1, 1, 0);
    }

    void init(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        enc_.init(rng);
        fc1_.init(rng);
        lstm_.init(rng);
        fc2_.init(rng);
        fcmap_.init(rng);
        for (auto& c : dec_convs_) c.init(rng);
        head_.init(rng);
    }

    const ModelSpec& spec() const { return spec_; }

    Output rollout(const std::vector<Tensor<T>>& frames, bool train) {
        if (static_cast<int>(frames.size()) != spec_.t_obs)
            throw ShapeError("reconstruction_rollout: expected exactly t_obs observed frames");
        trace_ = Trace{};
        Tensor<T> h({spec_.hidden}), c({spec_.hidden});
        for (int t = 0; t < spec_.t_obs; ++t) {
            typename EncoderNet<T>::Cache ec;
            Tensor<T> feat = enc_.forward(frames[static_cast<std::size_t>(t)], train, train ? &ec : nullptr);
            Tensor<T> z = fc1_.forward(feat);
            LstmCache<T> lc;
            Tensor<T> h2, c2;
            lstm_cell_fwd(z, h, c, lstm_.wx, lstm_.wh, lstm_.bx, lstm_.bh, h2, c2, lc);
            h = h2;
            c = c2;
            if (train) {
                trace_.enc.push_back(std::move(ec));
                trace_.feats.push_back(std::move(feat));
                trace_.lstm.push_back(std::move(lc));
            }
        }
        Output maps;
        for (int s = 0; s < spec_.t_pred; ++s) {
            Tensor<T> z = fc2_.forward(h);
            LstmCache<T> lc;
            Tensor<T> h2, c2;
            lstm_cell_fwd(z, h, c, lstm_.wx, lstm_.wh, lstm_.bx, lstm_.bh, h2, c2, lc);
            h = h2;
            c = c2;
            DecCache dcache;
            maps.push_back(decode(h, train, train ? &dcache : nullptr));
            if (train) {
                trace_.lstm.push_back(std::move(lc));
                trace_.dec.push_back(std::move(dcache));
            }
        }
        return maps;
    }

    void backward(const Output& gmaps) {
        Tensor<T> dh({spec_.hidden}), dc({spec_.hidden});
        for (int s = spec_.t_pred - 1; s >= 0; --s) {
            const std::size_t ss = static_cast<std::size_t>(s);
            const LstmCache<T>& lc = trace_.lstm[static_cast<std::size_t>(spec_.t_obs + s)];
            Tensor<T> gh_dec = decode_bwd(trace_.dec[ss], gmaps[ss]);
            dh.add_(gh_dec);
            LstmGrads<T> g = lstm_cell_bwd(lc, lstm_.wx, lstm_.wh, dh, dc, lstm_.gwx, lstm_.gwh,
                                           lstm_.gbx, lstm_.gbh);
            Tensor<T> gh_fc2 = fc2_.backward(lc.h_prev, g.gx);
            dh = g.gh_prev;
            dh.add_(gh_fc2);
            dc = g.gc_prev;
        }
        for (int t = spec_.t_obs - 1; t >= 0; --t) {
            const std::size_t st = static_cast<std::size_t>(t);
            LstmGrads<T> g = lstm_cell_bwd(trace_.lstm[st], lstm_.wx, lstm_.wh, dh, dc, lstm_.gwx,
                                           lstm_.gwh, lstm_.gbx, lstm_.gbh);
            dh = g.gh_prev;
            dc = g.gc_prev;
            Tensor<T> gfeat = fc1_.backward(trace_.feats[st], g.gx);
            enc_.backward(trace_.enc[st], gfeat);
        }
    }

    void visit_params(const ParamVisitor<T>& fn) {
        enc_.visit("encoder", fn);
        fc1_.visit("fc1", fn);
        lstm_.visit("lstm", fn);
        fc2_.visit("fc2", fn);
        fcmap_.visit("fcmap", fn);
        for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
            dec_convs_[i].visit("dec.conv" + std::to_string(i), fn);
            dec_bns_[i].visit("dec.bn" + std::to_string(i), fn);
        }
        head_.visit("head", fn);
    }

    void zero_grads() {
        visit_params([](const std::string&, Tensor<T>&, Tensor<T>* g, bool) {
            if (g) g->fill(T(0));
        });
    }

  private:
    struct DecCache {
        Tensor<T> h;                       // fcmap input
        std::vector<Tensor<T>> conv_in;    // post-upsample maps
        std::vector<BNCache<T>> bn;
        std::vector<Tensor<T>> bn_out;
        Tensor<T> pre_head;                // input to the 1x1 head conv
        Tensor<T> sig_full;                // sigmoid output before crop
    };

    Tensor<T> decode(const Tensor<T>& h, bool train, DecCache* cache) {
        Tensor<T> v = fcmap_.forward(h);
        Tensor<T> x({spec_.recon_base, 2, 2});
        std::copy(v.data(), v.data() + v.numel(), x.data());
        if (cache) cache->h = h;
        for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
            x = upsample2x_fwd(x);
            if (cache) cache->conv_in.push_back(x);
            x = dec_convs_[i].forward(x);
            BNCache<T> bnc;
            x = dec_bns_[i].forward(x, train, cache ? &bnc : nullptr);
            if (cache) {
                cache->bn.push_back(std::move(bnc));
                cache->bn_out.push_back(x);
            }
            x = relu_fwd(x);
        }
        if (cache) cache->pre_head = x;
        Tensor<T> logit = head_.forward(x);
        Tensor<T> p_full = sigmoid_fwd(logit);
        if (cache) cache->sig_full = p_full;
        Tensor<T> fitted = center_fit_fwd(p_full, spec_.in_h, spec_.in_w);
        Tensor<T> map({spec_.in_h, spec_.in_w});
        std::copy(fitted.data(), fitted.data() + fitted.numel(), map.data());
        return map;
    }

    // returns dLoss/dh
    Tensor<T> decode_bwd(const DecCache& cache, const Tensor<T>& gmap) {
        Tensor<T> g3({1, spec_.in_h, spec_.in_w});
        std::copy(gmap.data(), gmap.data() + gmap.numel(), g3.data());
        Tensor<T> g = center_fit_bwd(g3, cache.sig_full.dim(1), cache.sig_full.dim(2));
        g = sigmoid_bwd(cache.sig_full, g);
        g = head_.backward(cache.pre_head, g);
        for (int i = static_cast<int>(dec_convs_.size()) - 1; i >= 0; --i) {
            const std::size_t si = static_cast<std::size_t>(i);
            g = relu_bwd(cache.bn_out[si], g);
            g = dec_bns_[si].backward(g, cache.bn[si]);
            g = dec_convs_[si].backward(cache.conv_in[si], g);
            g = upsample2x_bwd(g);
        }
        Tensor<T> gv({static_cast<int>(g.numel())});
        std::copy(g.data(), g.data() + g.numel(), gv.data());
        return fcmap_.backward(cache.h, gv);
    }

    struct Trace {
        std::vector<typename EncoderNet<T>::Cache> enc;
        std::vector<Tensor<T>> feats;
        std::vector<LstmCache<T>> lstm;
        std::vector<DecCache> dec;
    };

    ModelSpec spec_;
    EncoderNet<T> enc_;
    LinearLayer<T> fc1_;
    LstmLayer<T> lstm_;
    LinearLayer<T> fc2_;
    LinearLayer<T> fcmap_;
    std::vector<Conv2dLayer<T>> dec_convs_;
    std::vector<BNLayer<T>> dec_bns_;
    Conv2dLayer<T> head_;
    Trace trace_;
};

// ---------------------------------------------------------------------------
// ConvLSTM baseline: one encoder block, ConvLSTM cell, upconv decoder

template <typename T>
class ConvLstmModel {
  public:
    static constexpr bool kMapOutput = true;
    using Output = std::vector<Tensor<T>>;

    explicit ConvLstmModel(const ModelSpec& spec) : spec_(spec) {
        enc_.build(spec);
        const auto trace = encoder_trace(spec);
        enc_c_ = trace.back().c;
        enc_h_ = trace.back().h;
        enc_w_ = trace.back().w;
        cell_.build(enc_c_, spec.hidden, spec.convlstm_kernel);
        proj_.build(spec.hidden, enc_c_, 1, 1, 0);
        int c_in = spec.hidden;
        for (int c : spec.convlstm_dec) {
            Conv2dLayer<T> conv;
            conv.build(c_in, c, 3, 1, 1);
            dec_convs_.push_back(std::move(conv));
            BNLayer<T> bn;
            bn.build(c);
            dec_bns_.push_back(std::move(bn));
            c_in = c;
        }
        head_.build(c_in, 1, 1, 1, 0);
    }

    void init(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        enc_.init(rng);
        cell_.init(rng);
        proj_.init(rng);
        for (auto& c : dec_convs_) c.init(rng);
        head_.init(rng);
    }

    const ModelSpec& spec() const { return spec_; }
    std::vector<int> hidden_shape() const { return {spec_.hidden, enc_h_, enc_w_}; }

    Output rollout(const std::vector<Tensor<T>>& frames, bool train) {
        if (static_cast<int>(frames.size()) != spec_.t_obs)
            throw ShapeError("convlstm_rollout: expected exactly t_obs observed frames");
        trace_ = Trace{};
        Tensor<T> h({spec_.hidden, enc_h_, enc_w_}), c({spec_.hidden, enc_h_, enc_w_});
        for (int t = 0; t < spec_.t_obs; ++t) {
            typename EncoderNet<T>::Cache ec;
            Tensor<T> x = encode_map(frames[static_cast<std::size_t>(t)], train, train ? &ec : nullptr);
            ConvLstmCache<T> cc;
            Tensor<T> h2, c2;
            convlstm_cell_fwd(x, h, c, cell_.wx, cell_.wh, cell_.b, h2, c2, cc);
            h = h2;
            c = c2;
            if (train) {
                trace_.enc.push_back(std::move(ec));
                trace_.cell.push_back(std::move(cc));
            }
        }
        Output maps;
        for (int s = 0; s < spec_.t_pred; ++s) {
            Tensor<T> x = proj_.forward(h);
            ConvLstmCache<T> cc;
            Tensor<T> h2, c2;
            convlstm_cell_fwd(x, h, c, cell_.wx, cell_.wh, cell_.b, h2, c2, cc);
            h = h2;
            c = c2;
            DecCache dcache;
            maps.push_back(decode(h, train, train ? &dcache : nullptr));
            if (train) {
                trace_.cell.push_back(std::move(cc));
                trace_.dec.push_back(std::move(dcache));
            }
        }
        return maps;
    }

    void backward(const Output& gmaps) {
        Tensor<T> dh({spec_.hidden, enc_h_, enc_w_}), dc({spec_.hidden, enc_h_, enc_w_});
        for (int s = spec_.t_pred - 1; s >= 0; --s) {
            const std::size_t ss = static_cast<std::size_t>(s);
            const ConvLstmCache<T>& cc = trace_.cell[static_cast<std::size_t>(spec_.t_obs + s)];
            dh.add_(decode_bwd(trace_.dec[ss], gmaps[ss]));
            ConvLstmGrads<T> g = convlstm_cell_bwd(cc, cell_.wx, cell_.wh, dh, dc, cell_.gwx,
                                                   cell_.gwh, cell_.gb);
            Tensor<T> gh_proj = proj_.backward(cc.h_prev, g.gx);
            dh = g.gh_prev;
            dh.add_(gh_proj);
            dc = g.gc_prev;
        }
        for (int t = spec_.t_obs - 1; t >= 0; --t) {
            const std::size_t st = static_cast<std::size_t>(t);
            ConvLstmGrads<T> g = convlstm_cell_bwd(trace_.cell[st], cell_.wx, cell_.wh, dh, dc,
                                                   cell_.gwx, cell_.gwh, cell_.gb);
            dh = g.gh_prev;
            dc = g.gc_prev;
            encode_map_bwd(trace_.enc[st], g.gx);
        }
    }

    void visit_params(const ParamVisitor<T>& fn) {
        enc_.visit("encoder", fn);
        cell_.visit("cell", fn);
        proj_.visit("proj", fn);
        for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
            dec_convs_[i].visit("dec.conv" + std::to_string(i), fn);
            dec_bns_[i].visit("dec.bn" + std::to_string(i), fn);
        }
        head_.visit("head", fn);
    }

    void zero_grads() {
        visit_params([](const std::string&, Tensor<T>&, Tensor<T>* g, bool) {
            if (g) g->fill(T(0));
        });
    }

  private:
    // Encoder without the flatten: the cell consumes C x eh x ew maps.
    Tensor<T> encode_map(const Tensor<T>& frame, bool train, typename EncoderNet<T>::Cache* cache) {
        Tensor<T> flat = enc_.forward(frame, train, cache);
        Tensor<T> x({enc_c_, enc_h_, enc_w_});
        std::copy(flat.data(), flat.data() + flat.numel(), x.data());
        return x;
    }
    void encode_map_bwd(const typename EncoderNet<T>::Cache& cache, const Tensor<T>& gx) {
        Tensor<T> gflat({static_cast<int>(gx.numel())});
        std::copy(gx.data(), gx.data() + gx.numel(), gflat.data());
        enc_.backward(cache, gflat);
    }

    struct DecCache {
        Tensor<T> h;
        std::vector<Tensor<T>> conv_in;
        std::vector<BNCache<T>> bn;
        std::vector<Tensor<T>> bn_out;
        Tensor<T> fit_in;   // last relu output, pre center-fit
        Tensor<T> pre_head; // padded/cropped map fed to the 1x1 head
        Tensor<T> sig;      // sigmoid output
    };

    Tensor<T> decode(const Tensor<T>& h, bool train, DecCache* cache) {
        Tensor<T> x = h;
        if (cache) cache->h = h;
        for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
            if (i + 1 < dec_convs_.size()) x = upsample2x_fwd(x);
            if (cache) cache->conv_in.push_back(x);
            x = dec_convs_[i].forward(x);
            BNCache<T> bnc;
            x = dec_bns_[i].forward(x, train, cache ? &bnc : nullptr);
            if (cache) {
                cache->bn.push_back(std::move(bnc));
                cache->bn_out.push_back(x);
            }
            x = relu_fwd(x);
        }
        if (cache) cache->fit_in = x;
        x = center_fit_fwd(x, spec_.in_h, spec_.in_w);
        if (cache) cache->pre_head = x;
        Tensor<T> logit = head_.forward(x);
        Tensor<T> p = sigmoid_fwd(logit);
        if (cache) cache->sig = p;
        Tensor<T> map({spec_.in_h, spec_.in_w});
        std::copy(p.data(), p.data() + p.numel(), map.data());
        return map;
    }

    Tensor<T> decode_bwd(const DecCache& cache, const Tensor<T>& gmap) {
        Tensor<T> g({1, spec_.in_h, spec_.in_w});
        std::copy(gmap.data(), gmap.data() + gmap.numel(), g.data());
        g = sigmoid_bwd(cache.sig, g);
        g = head_.backward(cache.pre_head, g);
        g = center_fit_bwd(g, cache.fit_in.dim(1), cache.fit_in.dim(2));
        for (int i = static_cast<int>(dec_convs_.size()) - 1; i >= 0; --i) {
            const std::size_t si = static_cast<std::size_t>(i);
            g = relu_bwd(cache.bn_out[si], g);
            g = dec_bns_[si].backward(g, cache.bn[si]);
            g = dec_convs_[si].backward(cache.conv_in[si], g);
            // upsample happened before every block but the last
            if (static_cast<std::size_t>(i) + 1 < dec_convs_.size()) g = upsample2x_bwd(g);
        }
        return g;
    }

    struct Trace {
        std::vector<typename EncoderNet<T>::Cache> enc;
        std::vector<ConvLstmCache<T>> cell;
        std::vector<DecCache> dec;
    };

    ModelSpec spec_;
    EncoderNet<T> enc_;
    int enc_c_ = 0, enc_h_ = 0, enc_w_ = 0;
    ConvLstmLayer<T> cell_;
    Conv2dLayer<T> proj_;
    std::vector<Conv2dLayer<T>> dec_convs_;
    std::vector<BNLayer<T>> dec_bns_;
    Conv2dLayer<T> head_;
    Trace trace_;
};

} // namespace firecast
