#include "eve/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace eve {

VarId Graph::emit(Tensor value, bool requires_grad, const char* op,
                  std::function<void(Graph&)> back) {
    if (!value.finite())
        throw std::runtime_error(std::string("non-finite result in op '") + op + "'");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.op = op;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

Tensor& Graph::grad_buf(VarId v) {
    Node& n = nodes_[v];
    if (n.grad.data.empty() || n.grad.shape != n.value.shape)
        n.grad = Tensor(n.value.shape, 0.0);
    return n.grad;
}

const Tensor& Graph::grad(VarId v) const {
    const Node& n = nodes_[v];
    if (n.grad.data.size() != n.value.data.size())
        throw std::logic_error("grad requested before backward");
    return n.grad;
}

VarId Graph::input(Tensor t) { return emit(std::move(t), true, "input", {}); }
VarId Graph::constant(Tensor t) { return emit(std::move(t), false, "constant", {}); }

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape) + " vs " + shape_str(b.shape));
}

VarId Graph::add(VarId a, VarId b) {
    require_same_shape(value(a), value(b), "add");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += value(b)[i];
    VarId id = emit(std::move(out), wants_grad(a) || wants_grad(b), "add", {});
    nodes_[id].back = [id, a, b](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.wants_grad(a)) {
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (g.wants_grad(b)) {
            Tensor& gb = g.grad_buf(b);
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
        }
    };
    return id;
}

VarId Graph::sub(VarId a, VarId b) {
    require_same_shape(value(a), value(b), "sub");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= value(b)[i];
    VarId id = emit(std::move(out), wants_grad(a) || wants_grad(b), "sub", {});
    nodes_[id].back = [id, a, b](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.wants_grad(a)) {
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (g.wants_grad(b)) {
            Tensor& gb = g.grad_buf(b);
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
        }
    };
    return id;
}

VarId Graph::mul(VarId a, VarId b) {
    require_same_shape(value(a), value(b), "mul");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= value(b)[i];
    VarId id = emit(std::move(out), wants_grad(a) || wants_grad(b), "mul", {});
    nodes_[id].back = [id, a, b](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& va = g.value(a);
        const Tensor& vb = g.value(b);
        if (g.wants_grad(a)) {
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vb[i];
        }
        if (g.wants_grad(b)) {
            Tensor& gb = g.grad_buf(b);
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * va[i];
        }
    };
    return id;
}

VarId Graph::scale(VarId a, double c) {
    Tensor out = value(a);
    for (auto& v : out.data) v *= c;
    VarId id = emit(std::move(out), wants_grad(a), "scale", {});
    nodes_[id].back = [id, a, c](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
    };
    return id;
}

VarId Graph::add_scalar(VarId a, double c) {
    Tensor out = value(a);
    for (auto& v : out.data) v += c;
    VarId id = emit(std::move(out), wants_grad(a), "add_scalar", {});
    nodes_[id].back = [id, a](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    };
    return id;
}

VarId Graph::exp(VarId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::exp(v);
    VarId id = emit(std::move(out), wants_grad(a), "exp", {});
    nodes_[id].back = [id, a](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vo = g.value(id);
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vo[i];
    };
    return id;
}

VarId Graph::log(VarId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::log(v);
    VarId id = emit(std::move(out), wants_grad(a), "log", {});
    nodes_[id].back = [id, a](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& va = g.value(a);
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / va[i];
    };
    return id;
}

VarId Graph::square(VarId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v *= v;
    VarId id = emit(std::move(out), wants_grad(a), "square", {});
    nodes_[id].back = [id, a](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& va = g.value(a);
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += 2.0 * va[i] * go[i];
    };
    return id;
}

VarId Graph::abs(VarId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::fabs(v);
    VarId id = emit(std::move(out), wants_grad(a), "abs", {});
    // subgradient 0 at the kink
    nodes_[id].back = [id, a](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& va = g.value(a);
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) {
            double s = va[i] > 0.0 ? 1.0 : (va[i] < 0.0 ? -1.0 : 0.0);
            ga[i] += s * go[i];
        }
    };
    return id;
}

VarId Graph::clamp_min(VarId a, double c) {
    Tensor out = value(a);
    for (auto& v : out.data) v = v > c ? v : c;
    VarId id = emit(std::move(out), wants_grad(a), "clamp_min", {});
    // grad passes only strictly above the clamp
    nodes_[id].back = [id, a, c](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& va = g.value(a);
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i)
            if (va[i] > c) ga[i] += go[i];
    };
    return id;
}

VarId Graph::sum(VarId a) {
    double s = 0.0;
    for (double v : value(a).data) s += v;
    VarId id = emit(Tensor::scalar(s), wants_grad(a), "sum", {});
    nodes_[id].back = [id, a](Graph& g) {
        if (!g.wants_grad(a)) return;
        double go = g.nodes_[id].grad[0];
        Tensor& ga = g.grad_buf(a);
        for (auto& v : ga.data) v += go;
    };
    return id;
}

VarId Graph::mean(VarId a) {
    std::size_t n = value(a).size();
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    double s = 0.0;
    for (double v : value(a).data) s += v;
    VarId id = emit(Tensor::scalar(s / static_cast<double>(n)), wants_grad(a), "mean", {});
    nodes_[id].back = [id, a, n](Graph& g) {
        if (!g.wants_grad(a)) return;
        double go = g.nodes_[id].grad[0] / static_cast<double>(n);
        Tensor& ga = g.grad_buf(a);
        for (auto& v : ga.data) v += go;
    };
    return id;
}

VarId Graph::reduce_neuron(VarId a) {
    const Tensor& v = value(a);
    if (v.shape.size() != 3)
        throw std::invalid_argument("reduce_neuron: expected rank-3 (B,N,k)");
    std::size_t batch = v.shape[0], n = v.shape[1], k = v.shape[2];
    if (batch == 0) throw std::invalid_argument("reduce_neuron: empty batch");
    Tensor out({n}, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < k; ++r)
                out[i] += v[(b * n + i) * k + r];
    for (auto& x : out.data) x /= static_cast<double>(batch);
    VarId id = emit(std::move(out), wants_grad(a), "reduce_neuron", {});
    nodes_[id].back = [id, a, batch, n, k](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& ga = g.grad_buf(a);
        double inv_b = 1.0 / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t r = 0; r < k; ++r)
                    ga[(b * n + i) * k + r] += go[i] * inv_b;
    };
    return id;
}

VarId Graph::neuron_affine(VarId a_mat, VarId bias, VarId h) {
    const Tensor& va = value(a_mat);
    const Tensor& vb = value(bias);
    const Tensor& vh = value(h);
    if (va.shape.size() != 3 || vb.shape.size() != 2 || vh.shape.size() != 2)
        throw std::invalid_argument("neuron_affine: want A (N,k,d), b (N,k), h (B,d)");
    std::size_t n = va.shape[0], k = va.shape[1], d = va.shape[2];
    std::size_t batch = vh.shape[0];
    if (vb.shape[0] != n || vb.shape[1] != k || vh.shape[1] != d)
        throw std::invalid_argument("neuron_affine: inconsistent shapes");
    Tensor out({batch, n, k}, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < k; ++r) {
                double acc = vb[i * k + r];
                const double* arow = &va.data[(i * k + r) * d];
                const double* hrow = &vh.data[b * d];
                for (std::size_t j = 0; j < d; ++j) acc += arow[j] * hrow[j];
                out[(b * n + i) * k + r] = acc;
            }
    bool rg = wants_grad(a_mat) || wants_grad(bias) || wants_grad(h);
    VarId id = emit(std::move(out), rg, "neuron_affine", {});
    nodes_[id].back = [id, a_mat, bias, h, n, k, d, batch](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& va = g.value(a_mat);
        const Tensor& vh = g.value(h);
        if (g.wants_grad(a_mat)) {
            Tensor& ga = g.grad_buf(a_mat);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t r = 0; r < k; ++r) {
                        double gv = go[(b * n + i) * k + r];
                        double* arow = &ga.data[(i * k + r) * d];
                        const double* hrow = &vh.data[b * d];
                        for (std::size_t j = 0; j < d; ++j) arow[j] += gv * hrow[j];
                    }
        }
        if (g.wants_grad(bias)) {
            Tensor& gb = g.grad_buf(bias);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t r = 0; r < k; ++r)
                        gb[i * k + r] += go[(b * n + i) * k + r];
        }
        if (g.wants_grad(h)) {
            Tensor& gh = g.grad_buf(h);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t r = 0; r < k; ++r) {
                        double gv = go[(b * n + i) * k + r];
                        const double* arow = &va.data[(i * k + r) * d];
                        double* hrow = &gh.data[b * d];
                        for (std::size_t j = 0; j < d; ++j) hrow[j] += gv * arow[j];
                    }
        }
    };
    return id;
}

VarId Graph::readout(VarId m, VarId w, VarId b0, std::size_t n_neurons) {
    const Tensor& vm = value(m);
    const Tensor& vw = value(w);
    const Tensor& vb = value(b0);
    if (vm.shape.size() != 2 || vw.shape.size() != 1)
        throw std::invalid_argument("readout: want m (B,M), w (M)");
    std::size_t batch = vm.shape[0], width = vm.shape[1];
    if (vw.shape[0] != width)
        throw std::invalid_argument("readout: w length " + shape_str(vw.shape) +
                                    " vs m width " + std::to_string(width));
    double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_neurons));
    double bias = vb.item();
    Tensor out({batch}, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        double acc = 0.0;
        for (std::size_t j = 0; j < width; ++j) acc += vw[j] * vm[b * width + j];
        out[b] = acc * inv_sqrt_n + bias;
    }
    bool rg = wants_grad(m) || wants_grad(w) || wants_grad(b0);
    VarId id = emit(std::move(out), rg, "readout", {});
    nodes_[id].back = [id, m, w, b0, batch, width, inv_sqrt_n](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vm = g.value(m);
        const Tensor& vw = g.value(w);
        if (g.wants_grad(m)) {
            Tensor& gm = g.grad_buf(m);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t j = 0; j < width; ++j)
                    gm[b * width + j] += go[b] * vw[j] * inv_sqrt_n;
        }
        if (g.wants_grad(w)) {
            Tensor& gw = g.grad_buf(w);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t j = 0; j < width; ++j)
                    gw[j] += go[b] * vm[b * width + j] * inv_sqrt_n;
        }
        if (g.wants_grad(b0)) {
            Tensor& gb = g.grad_buf(b0);
            for (std::size_t b = 0; b < batch; ++b) gb[0] += go[b];
        }
    };
    return id;
}

VarId Graph::reshape(VarId a, std::vector<std::size_t> shape) {
    const Tensor& v = value(a);
    if (Tensor::count(shape) != v.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out = v;
    out.shape = shape;
    VarId id = emit(std::move(out), wants_grad(a), "reshape", {});
    nodes_[id].back = [id, a](Graph& g) {
        if (!g.wants_grad(a)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& ga = g.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    };
    return id;
}

VarId Graph::mse(VarId pred, VarId target) {
    const Tensor& vp = value(pred);
    const Tensor& vt = value(target);
    require_same_shape(vp, vt, "mse");
    std::size_t n = vp.size();
    if (n == 0) throw std::invalid_argument("mse: empty");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = vp[i] - vt[i];
        s += d * d;
    }
    VarId id = emit(Tensor::scalar(s / static_cast<double>(n)),
                    wants_grad(pred) || wants_grad(target), "mse", {});
    nodes_[id].back = [id, pred, target, n](Graph& g) {
        double go = g.nodes_[id].grad[0];
        const Tensor& vp = g.value(pred);
        const Tensor& vt = g.value(target);
        double c = 2.0 * go / static_cast<double>(n);
        if (g.wants_grad(pred)) {
            Tensor& gp = g.grad_buf(pred);
            for (std::size_t i = 0; i < n; ++i) gp[i] += c * (vp[i] - vt[i]);
        }
        if (g.wants_grad(target)) {
            Tensor& gt = g.grad_buf(target);
            for (std::size_t i = 0; i < n; ++i) gt[i] -= c * (vp[i] - vt[i]);
        }
    };
    return id;
}

void Graph::backward(VarId loss) {
    if (value(loss).size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad = Tensor();
    grad_buf(loss)[0] = 1.0;
    for (VarId v = loss; v >= 0; --v) {
        Node& n = nodes_[v];
        if (!n.requires_grad || !n.back) continue;
        if (n.grad.data.size() != n.value.data.size()) continue;  // unreached
        n.back(*this);
    }
    // leaves without incoming gradient still report zeros
    for (auto& n : nodes_)
        if (n.requires_grad && n.grad.data.size() != n.value.data.size())
            n.grad = Tensor(n.value.shape, 0.0);
}

std::vector<Tensor> grad(const LossBuilder& build,
                         const std::vector<Tensor>& params) {
    Graph g;
    std::vector<VarId> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(g.input(p));
    VarId loss = build(g, ids);
    g.backward(loss);
    std::vector<Tensor> out;
    out.reserve(ids.size());
    for (VarId v : ids) out.push_back(g.grad(v));
    return out;
}

double eval_loss(const LossBuilder& build, const std::vector<Tensor>& params) {
    Graph g;
    std::vector<VarId> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(g.input(p));
    return g.scalar(build(g, ids));
}

std::vector<Tensor> fd_gradient(
    const std::function<double(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> params, double step) {
    if (step <= 0.0) throw std::invalid_argument("fd_gradient: step must be > 0");
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor g(params[p].shape, 0.0);
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            double orig = params[p][i];
            params[p][i] = orig + step;
            double hi = f(params);
            params[p][i] = orig - step;
            double lo = f(params);
            params[p][i] = orig;
            if (!std::isfinite(hi) || !std::isfinite(lo))
                throw std::runtime_error("fd_gradient: non-finite loss evaluation");
            g[i] = (hi - lo) / (2.0 * step);
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<Tensor> fd_gradient(const LossBuilder& build,
                                const std::vector<Tensor>& params,
                                double step) {
    return fd_gradient(
        [&](const std::vector<Tensor>& p) { return eval_loss(build, p); },
        params, step);
}

}  // namespace eve
