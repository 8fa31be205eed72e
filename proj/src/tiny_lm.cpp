#include "tttnn/tiny_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "tttnn/errors.hpp"
#include "tttnn/io_util.hpp"
#include "tttnn/kernels.hpp"
#include "tttnn/rng.hpp"

namespace tttnn {
namespace {

constexpr double kRmsEps = 1e-8;
constexpr double kInitStd = 0.02;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr char kCheckpointMagic[8] = {'T', 'T', 'T', 'N', 'N', 'L', 'M', '0'};

void rmsnorm_forward(const double* in, const double* gain, std::size_t len,
                     std::size_t d, double* out, double* rms) {
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < static_cast<long long>(len); ++t) {
        const double* row = in + static_cast<std::size_t>(t) * d;
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) ss += row[j] * row[j];
        const double r = std::sqrt(ss / static_cast<double>(d) + kRmsEps);
        rms[t] = r;
        double* o = out + static_cast<std::size_t>(t) * d;
        for (std::size_t j = 0; j < d; ++j) o[j] = row[j] / r * gain[j];
    }
}

// Accumulates into din and dgain. With y_j = g_j * x_j / r and
// r = sqrt(mean(x^2) + eps):
//   dx_j = g_j * dy_j / r - x_j * sum_i(dy_i * g_i * x_i) / (d * r^3)
void rmsnorm_backward(const double* in, const double* rms, const double* gain,
                      const double* dout, std::size_t len, std::size_t d,
                      double* din, double* dgain) {
    for (std::size_t t = 0; t < len; ++t) {
        const double* x = in + t * d;
        const double* dy = dout + t * d;
        double* dx = din + t * d;
        const double r = rms[t];
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += dy[j] * gain[j] * x[j];
        const double scale = s / (static_cast<double>(d) * r * r * r);
        for (std::size_t j = 0; j < d; ++j) {
            dgain[j] += dy[j] * x[j] / r;
            dx[j] += dy[j] * gain[j] / r - x[j] * scale;
        }
    }
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::size_t param_count(const ParamSet& ps) {
    std::size_t total = 0;
    ps.for_each([&total](const char*, const std::vector<double>& t) {
        total += t.size();
    });
    return total;
}

}  // namespace

void ModelConfig::validate() const {
    if (vocab < 2) throw ConfigError("model vocab must be at least 2");
    if (d_model == 0) throw ConfigError("model d_model must be positive");
    if (n_heads == 0 || d_model % n_heads != 0)
        throw ConfigError("model n_heads must divide d_model");
    if (d_ff == 0) throw ConfigError("model d_ff must be positive");
    if (context < 2) throw ConfigError("model context must be at least 2");
}

bool ModelConfig::same_shape(const ModelConfig& other) const {
    return vocab == other.vocab && d_model == other.d_model &&
           n_heads == other.n_heads && d_ff == other.d_ff &&
           context == other.context;
}

void ParamSet::resize_zeroed(const ModelConfig& cfg) {
    tok_emb.assign(cfg.vocab * cfg.d_model, 0.0);
    pos_emb.assign(cfg.context * cfg.d_model, 0.0);
    att_gain.assign(cfg.d_model, 0.0);
    wq.assign(cfg.d_model * cfg.d_model, 0.0);
    wk.assign(cfg.d_model * cfg.d_model, 0.0);
    wv.assign(cfg.d_model * cfg.d_model, 0.0);
    wo.assign(cfg.d_model * cfg.d_model, 0.0);
    mlp_gain.assign(cfg.d_model, 0.0);
    w1.assign(cfg.d_model * cfg.d_ff, 0.0);
    w2.assign(cfg.d_ff * cfg.d_model, 0.0);
    final_gain.assign(cfg.d_model, 0.0);
    w_out.assign(cfg.d_model * cfg.vocab, 0.0);
}

ModelState init_model(const ModelConfig& cfg) {
    cfg.validate();
    ModelState state;
    state.config = cfg;
    state.params.resize_zeroed(cfg);
    state.m.resize_zeroed(cfg);
    state.v.resize_zeroed(cfg);
    Rng rng(cfg.seed);
    state.params.for_each([&rng](const char* name, std::vector<double>& t) {
        if (std::string_view(name).ends_with("_gain")) {
            std::fill(t.begin(), t.end(), 1.0);
        } else {
            for (double& x : t) x = rng.next_normal() * kInitStd;
        }
    });
    return state;
}

std::vector<std::uint32_t> tokenize(std::string_view text) {
    std::vector<std::uint32_t> out;
    out.reserve(text.size() + 1);
    out.push_back(kBosToken);
    for (unsigned char c : text) out.push_back(c);
    return out;
}

std::vector<Window> chunk(const std::vector<std::uint32_t>& tokens,
                          std::size_t max_length, std::size_t stride) {
    if (max_length < 1) throw ConfigError("chunk: max_length must be at least 1");
    if (stride < 1 || stride > max_length)
        throw ConfigError("chunk: stride must be in [1, max_length]");
    std::vector<Window> windows;
    const std::size_t total = tokens.size();
    if (total <= 1) return windows;  // nothing beyond the BOS to score
    std::size_t scored_end = 1;      // position 0 is the BOS, never scored
    std::size_t start = 0;
    while (scored_end < total) {
        const std::size_t end = std::min(start + max_length, total);
        Window w;
        if (start == 0) {
            w.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(end));
        } else {
            // Later windows stand alone, so they get a fresh BOS in front of
            // their slice; only their tail past the previous window is new.
            w.tokens.reserve(end - start + 1);
            w.tokens.push_back(kBosToken);
            w.tokens.insert(w.tokens.end(),
                            tokens.begin() + static_cast<std::ptrdiff_t>(start),
                            tokens.begin() + static_cast<std::ptrdiff_t>(end));
        }
        w.n_scored = end - scored_end;
        scored_end = end;
        windows.push_back(std::move(w));
        start += stride;
    }
    return windows;
}

SeqActivations forward_sequence(const ModelState& state,
                                std::span<const std::uint32_t> ids) {
    const ModelConfig& cfg = state.config;
    const std::size_t len = ids.size();
    if (len == 0) throw ConfigError("forward: empty sequence");
    if (len > cfg.context)
        throw ConfigError("forward: sequence length " + std::to_string(len) +
                          " exceeds context " + std::to_string(cfg.context));
    for (std::uint32_t id : ids) {
        if (id >= cfg.vocab)
            throw TokenRangeError("token id " + std::to_string(id) +
                                  " out of range for vocab " +
                                  std::to_string(cfg.vocab));
    }

    const std::size_t d = cfg.d_model;
    const std::size_t vocab = cfg.vocab;
    const std::size_t heads = cfg.n_heads;
    const std::size_t dh = d / heads;
    const std::size_t ff = cfg.d_ff;
    const ParamSet& p = state.params;

    SeqActivations s;
    s.ids.assign(ids.begin(), ids.end());
    s.len = len;

    s.x.resize(len * d);
    for (std::size_t t = 0; t < len; ++t) {
        const double* tok = &p.tok_emb[ids[t] * d];
        const double* pos = &p.pos_emb[t * d];
        double* x = &s.x[t * d];
        for (std::size_t j = 0; j < d; ++j) x[j] = tok[j] + pos[j];
    }

    s.rms1.resize(len);
    s.a.resize(len * d);
    rmsnorm_forward(s.x.data(), p.att_gain.data(), len, d, s.a.data(), s.rms1.data());

    s.q.resize(len * d);
    s.k.resize(len * d);
    s.v.resize(len * d);
    kernels::matmul_nn(s.a.data(), p.wq.data(), s.q.data(), len, d, d);
    kernels::matmul_nn(s.a.data(), p.wk.data(), s.k.data(), len, d, d);
    kernels::matmul_nn(s.a.data(), p.wv.data(), s.v.data(), len, d, d);

    s.probs_att.assign(heads * len * len, 0.0);
    s.att.assign(len * d, 0.0);
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
#pragma omp parallel for collapse(2) schedule(static)
    for (long long h = 0; h < static_cast<long long>(heads); ++h) {
        for (long long t = 0; t < static_cast<long long>(len); ++t) {
            const std::size_t hoff = static_cast<std::size_t>(h) * dh;
            const std::size_t tt = static_cast<std::size_t>(t);
            double* row = &s.probs_att[(static_cast<std::size_t>(h) * len + tt) * len];
            const double* qt = &s.q[tt * d + hoff];
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t u = 0; u <= tt; ++u) {
                const double* ku = &s.k[u * d + hoff];
                double acc = 0.0;
                for (std::size_t j = 0; j < dh; ++j) acc += qt[j] * ku[j];
                row[u] = acc * inv_sqrt_dh;
                mx = std::max(mx, row[u]);
            }
            double sum = 0.0;
            for (std::size_t u = 0; u <= tt; ++u) {
                row[u] = std::exp(row[u] - mx);
                sum += row[u];
            }
            for (std::size_t u = 0; u <= tt; ++u) row[u] /= sum;
            double* at = &s.att[tt * d + hoff];
            for (std::size_t u = 0; u <= tt; ++u) {
                const double* vu = &s.v[u * d + hoff];
                const double w = row[u];
                for (std::size_t j = 0; j < dh; ++j) at[j] += w * vu[j];
            }
        }
    }

    std::vector<double> o(len * d);
    kernels::matmul_nn(s.att.data(), p.wo.data(), o.data(), len, d, d);
    s.x2.resize(len * d);
    for (std::size_t i = 0; i < len * d; ++i) s.x2[i] = s.x[i] + o[i];

    s.rms2.resize(len);
    s.b.resize(len * d);
    rmsnorm_forward(s.x2.data(), p.mlp_gain.data(), len, d, s.b.data(), s.rms2.data());

    s.h1.resize(len * ff);
    kernels::matmul_nn(s.b.data(), p.w1.data(), s.h1.data(), len, d, ff);
    s.r.resize(len * ff);
    for (std::size_t i = 0; i < len * ff; ++i)
        s.r[i] = s.h1[i] > 0.0 ? s.h1[i] : 0.0;
    std::vector<double> h2(len * d);
    kernels::matmul_nn(s.r.data(), p.w2.data(), h2.data(), len, ff, d);
    s.x3.resize(len * d);
    for (std::size_t i = 0; i < len * d; ++i) s.x3[i] = s.x2[i] + h2[i];

    s.rms3.resize(len);
    s.f.resize(len * d);
    rmsnorm_forward(s.x3.data(), p.final_gain.data(), len, d, s.f.data(), s.rms3.data());

    s.probs.resize(len * vocab);
    kernels::matmul_nn(s.f.data(), p.w_out.data(), s.probs.data(), len, d, vocab);
    s.pos_nll.assign(len - 1, 0.0);
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < static_cast<long long>(len); ++t) {
        const std::size_t tt = static_cast<std::size_t>(t);
        double* row = &s.probs[tt * vocab];
        const bool scored = tt + 1 < len;
        const double target_logit = scored ? row[ids[tt + 1]] : 0.0;
        double mx = row[0];
        for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < vocab; ++j) row[j] /= sum;
        if (scored) s.pos_nll[tt] = mx + std::log(sum) - target_logit;
    }

    return s;
}

std::pair<double, ForwardCache> forward_nll(const ModelState& state,
                                            const TokenBatch& batch) {
    ForwardCache cache;
    cache.state_version = state.version;
    cache.seqs.reserve(batch.sequences.size());
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& seq : batch.sequences) {
        cache.seqs.push_back(forward_sequence(state, seq));
        for (double x : cache.seqs.back().pos_nll) total += x;
        n += cache.seqs.back().pos_nll.size();
    }
    if (n == 0)
        throw EmptyTargetError("forward: batch has no scored positions");
    cache.n_scored = n;
    return {total / static_cast<double>(n), std::move(cache)};
}

Gradients backward(const ModelState& state, const ForwardCache& cache) {
    if (cache.state_version != state.version)
        throw CacheError("backward: parameters changed since the forward pass");
    if (cache.n_scored == 0)
        throw CacheError("backward: cache has no scored positions");

    const ModelConfig& cfg = state.config;
    const ParamSet& p = state.params;
    const std::size_t d = cfg.d_model;
    const std::size_t vocab = cfg.vocab;
    const std::size_t heads = cfg.n_heads;
    const std::size_t dh = d / heads;
    const std::size_t ff = cfg.d_ff;
    const double inv_n = 1.0 / static_cast<double>(cache.n_scored);
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Gradients g;
    g.resize_zeroed(cfg);

    std::vector<double> dlogits, df, dx3, dr, dh1, db, dx2, datt, dq, dk, dv,
        da, dx, tmp;

    for (const SeqActivations& s : cache.seqs) {
        const std::size_t len = s.len;

        dlogits.assign(len * vocab, 0.0);
        for (std::size_t t = 0; t + 1 < len; ++t) {
            double* row = &dlogits[t * vocab];
            const double* pr = &s.probs[t * vocab];
            for (std::size_t j = 0; j < vocab; ++j) row[j] = pr[j] * inv_n;
            row[s.ids[t + 1]] -= inv_n;
        }

        tmp.resize(d * vocab);
        kernels::matmul_tn(s.f.data(), dlogits.data(), tmp.data(), d, len, vocab);
        add_into(g.w_out, tmp);
        df.resize(len * d);
        kernels::matmul_nt(dlogits.data(), p.w_out.data(), df.data(), len, vocab, d);

        dx3.assign(len * d, 0.0);
        rmsnorm_backward(s.x3.data(), s.rms3.data(), p.final_gain.data(),
                         df.data(), len, d, dx3.data(), g.final_gain.data());

        dr.resize(len * ff);
        kernels::matmul_nt(dx3.data(), p.w2.data(), dr.data(), len, d, ff);
        tmp.resize(ff * d);
        kernels::matmul_tn(s.r.data(), dx3.data(), tmp.data(), ff, len, d);
        add_into(g.w2, tmp);
        dh1.resize(len * ff);
        for (std::size_t i = 0; i < len * ff; ++i)
            dh1[i] = s.h1[i] > 0.0 ? dr[i] : 0.0;
        db.resize(len * d);
        kernels::matmul_nt(dh1.data(), p.w1.data(), db.data(), len, ff, d);
        tmp.resize(d * ff);
        kernels::matmul_tn(s.b.data(), dh1.data(), tmp.data(), d, len, ff);
        add_into(g.w1, tmp);

        dx2 = dx3;  // residual path around the MLP
        rmsnorm_backward(s.x2.data(), s.rms2.data(), p.mlp_gain.data(),
                         db.data(), len, d, dx2.data(), g.mlp_gain.data());

        datt.resize(len * d);
        kernels::matmul_nt(dx2.data(), p.wo.data(), datt.data(), len, d, d);
        tmp.resize(d * d);
        kernels::matmul_tn(s.att.data(), dx2.data(), tmp.data(), d, len, d);
        add_into(g.wo, tmp);

        dq.assign(len * d, 0.0);
        dk.assign(len * d, 0.0);
        dv.assign(len * d, 0.0);
        // Heads own disjoint column slices of dq/dk/dv, so they can run in
        // parallel; within a head the t loop stays serial because dv and dk
        // accumulate across rows.
#pragma omp parallel for schedule(static)
        for (long long h = 0; h < static_cast<long long>(heads); ++h) {
            const std::size_t hoff = static_cast<std::size_t>(h) * dh;
            std::vector<double> dp(len);
            for (std::size_t t = 0; t < len; ++t) {
                const double* prow =
                    &s.probs_att[(static_cast<std::size_t>(h) * len + t) * len];
                const double* dat = &datt[t * d + hoff];
                double sum = 0.0;
                for (std::size_t u = 0; u <= t; ++u) {
                    const double* vu = &s.v[u * d + hoff];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < dh; ++j) acc += dat[j] * vu[j];
                    dp[u] = acc;
                    sum += acc * prow[u];
                    double* dvu = &dv[u * d + hoff];
                    const double w = prow[u];
                    for (std::size_t j = 0; j < dh; ++j) dvu[j] += w * dat[j];
                }
                double* dqt = &dq[t * d + hoff];
                const double* qt = &s.q[t * d + hoff];
                for (std::size_t u = 0; u <= t; ++u) {
                    const double dscore = prow[u] * (dp[u] - sum) * inv_sqrt_dh;
                    const double* ku = &s.k[u * d + hoff];
                    double* dku = &dk[u * d + hoff];
                    for (std::size_t j = 0; j < dh; ++j) {
                        dqt[j] += dscore * ku[j];
                        dku[j] += dscore * qt[j];
                    }
                }
            }
        }

        da.resize(len * d);
        kernels::matmul_nt(dq.data(), p.wq.data(), da.data(), len, d, d);
        tmp.resize(len * d);
        kernels::matmul_nt(dk.data(), p.wk.data(), tmp.data(), len, d, d);
        add_into(da, tmp);
        kernels::matmul_nt(dv.data(), p.wv.data(), tmp.data(), len, d, d);
        add_into(da, tmp);
        tmp.resize(d * d);
        kernels::matmul_tn(s.a.data(), dq.data(), tmp.data(), d, len, d);
        add_into(g.wq, tmp);
        kernels::matmul_tn(s.a.data(), dk.data(), tmp.data(), d, len, d);
        add_into(g.wk, tmp);
        kernels::matmul_tn(s.a.data(), dv.data(), tmp.data(), d, len, d);
        add_into(g.wv, tmp);

        dx = dx2;  // residual path around attention
        rmsnorm_backward(s.x.data(), s.rms1.data(), p.att_gain.data(),
                         da.data(), len, d, dx.data(), g.att_gain.data());

        for (std::size_t t = 0; t < len; ++t) {
            const double* dxt = &dx[t * d];
            double* dtok = &g.tok_emb[s.ids[t] * d];
            double* dpos = &g.pos_emb[t * d];
            for (std::size_t j = 0; j < d; ++j) {
                dtok[j] += dxt[j];
                dpos[j] += dxt[j];
            }
        }
    }

    return g;
}

void adamw_step(ModelState& state, const Gradients& grads, double lr) {
    std::vector<std::vector<double>*> ps, ms, vs;
    std::vector<const std::vector<double>*> gs;
    state.params.for_each([&ps](const char*, std::vector<double>& t) { ps.push_back(&t); });
    state.m.for_each([&ms](const char*, std::vector<double>& t) { ms.push_back(&t); });
    state.v.for_each([&vs](const char*, std::vector<double>& t) { vs.push_back(&t); });
    grads.for_each([&gs](const char*, const std::vector<double>& t) { gs.push_back(&t); });

    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (gs[i]->size() != ps[i]->size())
            throw DimensionMismatch("gradient shape does not match parameters");
    }
    // Refuse the whole step before touching any state.
    for (const auto* t : gs) {
        for (double x : *t) {
            if (!std::isfinite(x))
                throw NonFiniteGradError("non-finite gradient, update refused");
        }
    }

    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        std::vector<double>& pv = *ps[i];
        std::vector<double>& mv = *ms[i];
        std::vector<double>& vv = *vs[i];
        const std::vector<double>& gv = *gs[i];
#pragma omp parallel for schedule(static)
        for (long long n = 0; n < static_cast<long long>(pv.size()); ++n) {
            const double gg = gv[n];
            mv[n] = kBeta1 * mv[n] + (1.0 - kBeta1) * gg;
            vv[n] = kBeta2 * vv[n] + (1.0 - kBeta2) * gg * gg;
            const double mhat = mv[n] / bc1;
            const double vhat = vv[n] / bc2;
            pv[n] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
    state.version += 1;
}

Snapshot snapshot(const ModelState& state) {
    return Snapshot{state.config, state.params, state.m, state.v, state.step};
}

void restore(ModelState& state, const Snapshot& snap) {
    if (!state.config.same_shape(snap.config))
        throw SnapshotError("snapshot shape does not match model");
    state.config = snap.config;
    state.params = snap.params;
    state.m = snap.m;
    state.v = snap.v;
    state.step = snap.step;
    state.version += 1;
}

std::pair<double, std::size_t> sequence_nll(const ModelState& state,
                                            std::string_view text,
                                            std::size_t max_length,
                                            std::size_t stride) {
    if (max_length + 1 > state.config.context)
        throw ConfigError("sequence_nll: max_length + 1 exceeds model context");
    if (text.empty()) return {0.0, 0};
    const auto windows = chunk(tokenize(text), max_length, stride);
    double total = 0.0;
    std::size_t count = 0;
    for (const Window& w : windows) {
        const SeqActivations acts = forward_sequence(state, w.tokens);
        const std::vector<double>& nll = acts.pos_nll;
        for (std::size_t i = nll.size() - w.n_scored; i < nll.size(); ++i)
            total += nll[i];
        count += w.n_scored;
    }
    return {total, count};
}

void save_checkpoint(const ModelState& state, const std::string& path) {
    const std::size_t tensor_doubles = param_count(state.params);
    std::string buf;
    buf.reserve(8 + 7 * 8 + 3 * tensor_doubles * 8);
    buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    io::put_u64le(buf, state.config.vocab);
    io::put_u64le(buf, state.config.d_model);
    io::put_u64le(buf, state.config.n_heads);
    io::put_u64le(buf, state.config.d_ff);
    io::put_u64le(buf, state.config.context);
    io::put_u64le(buf, state.config.seed);
    io::put_u64le(buf, state.step);
    const auto dump = [&buf](const ParamSet& ps) {
        ps.for_each([&buf](const char*, const std::vector<double>& t) {
            for (double x : t) io::put_f64le(buf, x);
        });
    };
    dump(state.params);
    dump(state.m);
    dump(state.v);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SnapshotError("cannot open checkpoint for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) throw SnapshotError("short write saving checkpoint: " + path);
}

ModelState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    if (buf.size() < 8 + 7 * 8)
        throw SnapshotError("checkpoint too short: " + path);
    if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw SnapshotError("bad checkpoint magic: " + path);

    const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());
    std::size_t off = sizeof(kCheckpointMagic);
    const auto take_u64 = [&bytes, &off]() {
        const std::uint64_t v = io::get_u64le(bytes + off);
        off += 8;
        return v;
    };
    ModelConfig cfg;
    cfg.vocab = static_cast<std::size_t>(take_u64());
    cfg.d_model = static_cast<std::size_t>(take_u64());
    cfg.n_heads = static_cast<std::size_t>(take_u64());
    cfg.d_ff = static_cast<std::size_t>(take_u64());
    cfg.context = static_cast<std::size_t>(take_u64());
    cfg.seed = take_u64();
    const std::uint64_t step = take_u64();
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw SnapshotError(std::string("checkpoint header invalid: ") + e.what());
    }

    ModelState state;
    state.config = cfg;
    state.params.resize_zeroed(cfg);
    state.m.resize_zeroed(cfg);
    state.v.resize_zeroed(cfg);
    state.step = step;
    const std::size_t tensor_doubles = param_count(state.params);
    if (buf.size() != 8 + 7 * 8 + 3 * tensor_doubles * 8)
        throw SnapshotError("checkpoint size mismatch: " + path);
    const auto fill = [&bytes, &off](ParamSet& ps) {
        ps.for_each([&bytes, &off](const char*, std::vector<double>& t) {
            for (double& x : t) {
                x = io::get_f64le(bytes + off);
                off += 8;
            }
        });
    };
    fill(state.params);
    fill(state.m);
    fill(state.v);
    return state;
}

}  // namespace tttnn
