#pragma once

// Reverse-mode automatic differentiation over dense arrays, plus the
// standalone kernels (softmax, leaky ReLU, sigmoid, squared L2) and a
// central-finite-difference gradient checker.
//
// All reductions run left-to-right in a fixed order, so results are
// bitwise reproducible for identical inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "patentkg/array.hpp"
#include "patentkg/common.hpp"

namespace patentkg {

// ---------------------------------------------------------------------------
// Standalone kernels (pure array in, array out).
// ---------------------------------------------------------------------------

inline std::vector<double> softmax_values(const std::vector<double>& v) {
    if (v.empty()) throw shape_error("softmax: empty input");
    double m = v[0];
    for (double x : v) {
        if (!std::isfinite(x)) throw numeric_error("softmax: non-finite input");
        m = std::max(m, x);
    }
    std::vector<double> out(v.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        denom += out[i];
    }
    for (double& x : out) x /= denom;
    return out;
}

inline Array softmax(const Array& v) {
    if (v.rank() != 1) throw shape_error("softmax: expected rank-1 input");
    return Array(v.shape, softmax_values(v.data));
}

inline double leaky_relu_scalar(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline Array leaky_relu(const Array& v, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw input_error("leaky_relu: slope must be in (0, 1)");
    v.require_finite("leaky_relu");
    Array out = v;
    for (double& x : out.data) x = leaky_relu_scalar(x, slope);
    return out;
}

inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline Array sigmoid(const Array& v) {
    v.require_finite("sigmoid");
    Array out = v;
    for (double& x : out.data) x = sigmoid_scalar(x);
    return out;
}

inline double sq_l2_distance(const Array& u, const Array& v) {
    require_same_shape(u, v, "sq_l2_distance");
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = u.data[i] - v.data[i];
        sum += d * d;
    }
    return sum;
}

// ---------------------------------------------------------------------------
// ParamStore: named trainable arrays with paired gradient slots.
// ---------------------------------------------------------------------------

class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

    // Initializes uniformly in [-1/sqrt(dim), +1/sqrt(dim)] where dim is the
    // trailing dimension. Draw order follows creation order.
    Array& add(const std::string& name, std::vector<std::size_t> shape) {
        Array value = Array::zeros(shape);
        double bound = 1.0 / std::sqrt(static_cast<double>(shape.back()));
        for (double& x : value.data) x = rng_.uniform(-bound, bound);
        return insert(name, std::move(value));
    }

    Array& add_zeros(const std::string& name, std::vector<std::size_t> shape) {
        return insert(name, Array::zeros(std::move(shape)));
    }

    Array& insert(const std::string& name, Array value) {
        if (slots_.count(name)) throw input_error("ParamStore: duplicate parameter " + name);
        order_.push_back(name);
        Slot slot{value, Array::zeros(value.shape)};
        auto [it, ok] = slots_.emplace(name, std::move(slot));
        (void)ok;
        return it->second.value;
    }

    bool has(const std::string& name) const { return slots_.count(name) != 0; }

    Array& value(const std::string& name) { return slot(name).value; }
    const Array& value(const std::string& name) const { return slot(name).value; }
    Array& grad(const std::string& name) { return slot(name).grad; }
    const Array& grad(const std::string& name) const { return slot(name).grad; }

    const std::vector<std::string>& names() const { return order_; }
    std::uint64_t seed() const { return seed_; }
    DetRng& rng() { return rng_; }

    void zero_grads() {
        for (auto& [name, s] : slots_) std::fill(s.grad.data.begin(), s.grad.data.end(), 0.0);
    }

    void sgd_step(double learning_rate) {
        for (const std::string& name : order_) {
            Slot& s = slot(name);
            for (std::size_t i = 0; i < s.value.size(); ++i)
                s.value.data[i] -= learning_rate * s.grad.data[i];
        }
    }

    bool operator==(const ParamStore& other) const {
        if (order_ != other.order_) return false;
        for (const std::string& name : order_)
            if (!(value(name) == other.value(name))) return false;
        return true;
    }

private:
    struct Slot {
        Array value;
        Array grad;
    };

    Slot& slot(const std::string& name) {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw lookup_error("ParamStore: unknown parameter " + name);
        return it->second;
    }
    const Slot& slot(const std::string& name) const {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw lookup_error("ParamStore: unknown parameter " + name);
        return it->second;
    }

    std::uint64_t seed_;
    DetRng rng_;
    std::vector<std::string> order_;
    std::map<std::string, Slot> slots_;
};

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

struct Var {
    int id = -1;
};

class Tape {
public:
    Tape() { nodes_.reserve(1024); }

    // --- leaves ---

    Var constant(std::vector<double> values) {
        return push(std::move(values), {}, nullptr);
    }

    Var constant_scalar(double v) { return constant({v}); }

    // Leaf over a full parameter array; backward accumulates into the store.
    Var param(ParamStore& store, const std::string& name) {
        const Array& a = store.value(name);
        Var v = push(a.data, {}, nullptr);
        bindings_.push_back({v.id, &store, name, 0, a.size()});
        return v;
    }

    // Leaf over one row of a rank-2 parameter.
    Var param_row(ParamStore& store, const std::string& name, std::size_t row) {
        const Array& a = store.value(name);
        if (a.rank() != 2) throw shape_error("Tape::param_row: " + name + " is not rank-2");
        if (row >= a.rows()) throw lookup_error("Tape::param_row: row out of range for " + name);
        std::size_t w = a.cols();
        Var v = push(a.row(row), {}, nullptr);
        bindings_.push_back({v.id, &store, name, row * w, w});
        return v;
    }

    // --- elementwise / structural ops ---

    Var add(Var a, Var b) {
        check_same_len(a, b, "add");
        std::vector<double> out(len(a));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = val(a)[i] + val(b)[i];
        return push(std::move(out), {a.id, b.id}, [](Tape& t, Node& n) {
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                t.nodes_[static_cast<std::size_t>(n.inputs[0])].grad[i] += n.grad[i];
                t.nodes_[static_cast<std::size_t>(n.inputs[1])].grad[i] += n.grad[i];
            }
        });
    }

    Var sub(Var a, Var b) {
        check_same_len(a, b, "sub");
        std::vector<double> out(len(a));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = val(a)[i] - val(b)[i];
        return push(std::move(out), {a.id, b.id}, [](Tape& t, Node& n) {
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                t.nodes_[static_cast<std::size_t>(n.inputs[0])].grad[i] += n.grad[i];
                t.nodes_[static_cast<std::size_t>(n.inputs[1])].grad[i] -= n.grad[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        check_same_len(a, b, "mul");
        std::vector<double> out(len(a));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = val(a)[i] * val(b)[i];
        return push(std::move(out), {a.id, b.id}, [](Tape& t, Node& n) {
            Node& na = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nb = t.nodes_[static_cast<std::size_t>(n.inputs[1])];
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                na.grad[i] += n.grad[i] * nb.value[i];
                nb.grad[i] += n.grad[i] * na.value[i];
            }
        });
    }

    Var scale(Var a, double c) {
        std::vector<double> out(len(a));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * val(a)[i];
        return push(std::move(out), {a.id}, [c](Tape& t, Node& n) {
            Node& na = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i) na.grad[i] += c * n.grad[i];
        });
    }

    Var add_scalar_offset(Var a, double c) {
        std::vector<double> out(len(a));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = val(a)[i] + c;
        return push(std::move(out), {a.id}, [](Tape& t, Node& n) {
            Node& na = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i) na.grad[i] += n.grad[i];
        });
    }

    // Left-to-right sum of same-length vars.
    Var add_many(const std::vector<Var>& vs) {
        if (vs.empty()) throw input_error("add_many: empty input list");
        Var acc = vs[0];
        for (std::size_t i = 1; i < vs.size(); ++i) acc = add(acc, vs[i]);
        return acc;
    }

    Var slice(Var a, std::size_t offset, std::size_t n) {
        if (offset + n > len(a)) throw shape_error("slice: range out of bounds");
        std::vector<double> out(val(a).begin() + static_cast<std::ptrdiff_t>(offset),
                                val(a).begin() + static_cast<std::ptrdiff_t>(offset + n));
        return push(std::move(out), {a.id}, [offset](Tape& t, Node& n_) {
            Node& na = t.nodes_[static_cast<std::size_t>(n_.inputs[0])];
            for (std::size_t i = 0; i < n_.grad.size(); ++i) na.grad[offset + i] += n_.grad[i];
        });
    }

    Var concat(Var a, Var b) {
        std::vector<double> out;
        out.reserve(len(a) + len(b));
        out.insert(out.end(), val(a).begin(), val(a).end());
        out.insert(out.end(), val(b).begin(), val(b).end());
        std::size_t na_len = len(a);
        return push(std::move(out), {a.id, b.id}, [na_len](Tape& t, Node& n) {
            Node& na = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nb = t.nodes_[static_cast<std::size_t>(n.inputs[1])];
            for (std::size_t i = 0; i < na_len; ++i) na.grad[i] += n.grad[i];
            for (std::size_t i = 0; i < nb.grad.size(); ++i) nb.grad[i] += n.grad[na_len + i];
        });
    }

    // Rank-1 vector from scalar vars.
    Var stack(const std::vector<Var>& scalars) {
        if (scalars.empty()) throw input_error("stack: empty input list");
        std::vector<double> out(scalars.size());
        std::vector<int> ids(scalars.size());
        for (std::size_t i = 0; i < scalars.size(); ++i) {
            if (len(scalars[i]) != 1) throw shape_error("stack: inputs must be scalars");
            out[i] = val(scalars[i])[0];
            ids[i] = scalars[i].id;
        }
        return push(std::move(out), std::move(ids), [](Tape& t, Node& n) {
            for (std::size_t i = 0; i < n.inputs.size(); ++i)
                t.nodes_[static_cast<std::size_t>(n.inputs[i])].grad[0] += n.grad[i];
        });
    }

    // --- contractions ---

    Var dot(Var a, Var b) {
        check_same_len(a, b, "dot");
        double s = 0.0;
        for (std::size_t i = 0; i < len(a); ++i) s += val(a)[i] * val(b)[i];
        return push({s}, {a.id, b.id}, [](Tape& t, Node& n) {
            Node& na = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nb = t.nodes_[static_cast<std::size_t>(n.inputs[1])];
            double g = n.grad[0];
            for (std::size_t i = 0; i < na.value.size(); ++i) {
                na.grad[i] += g * nb.value[i];
                nb.grad[i] += g * na.value[i];
            }
        });
    }

    // y[o] = sum_i W[i*out_dim + o] * x[i]  (W row-major [in_dim, out_dim]).
    Var matvec_t(Var w, Var x, std::size_t in_dim, std::size_t out_dim) {
        if (len(w) != in_dim * out_dim || len(x) != in_dim)
            throw shape_error("matvec_t: dimension mismatch");
        std::vector<double> out(out_dim, 0.0);
        for (std::size_t i = 0; i < in_dim; ++i) {
            double xi = val(x)[i];
            const double* wrow = val(w).data() + i * out_dim;
            for (std::size_t o = 0; o < out_dim; ++o) out[o] += wrow[o] * xi;
        }
        return push(std::move(out), {w.id, x.id}, [in_dim, out_dim](Tape& t, Node& n) {
            Node& nw = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nx = t.nodes_[static_cast<std::size_t>(n.inputs[1])];
            for (std::size_t i = 0; i < in_dim; ++i) {
                double xi = nx.value[i];
                double gx = 0.0;
                const double* wrow = nw.value.data() + i * out_dim;
                double* gwrow = nw.grad.data() + i * out_dim;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    gwrow[o] += n.grad[o] * xi;
                    gx += wrow[o] * n.grad[o];
                }
                nx.grad[i] += gx;
            }
        });
    }

    // sum_k coeffs[k] * vecs[k], all vecs the same length.
    Var weighted_sum(Var coeffs, const std::vector<Var>& vecs) {
        if (len(coeffs) != vecs.size()) throw shape_error("weighted_sum: coefficient count mismatch");
        if (vecs.empty()) throw input_error("weighted_sum: empty vector list");
        std::size_t d = len(vecs[0]);
        std::vector<double> out(d, 0.0);
        std::vector<int> ids;
        ids.reserve(vecs.size() + 1);
        ids.push_back(coeffs.id);
        for (std::size_t k = 0; k < vecs.size(); ++k) {
            if (len(vecs[k]) != d) throw shape_error("weighted_sum: vector length mismatch");
            ids.push_back(vecs[k].id);
            double c = val(coeffs)[k];
            for (std::size_t i = 0; i < d; ++i) out[i] += c * val(vecs[k])[i];
        }
        return push(std::move(out), std::move(ids), [](Tape& t, Node& n) {
            Node& nc = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t k = 1; k < n.inputs.size(); ++k) {
                Node& nv = t.nodes_[static_cast<std::size_t>(n.inputs[k])];
                double c = nc.value[k - 1];
                double gc = 0.0;
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    gc += n.grad[i] * nv.value[i];
                    nv.grad[i] += c * n.grad[i];
                }
                nc.grad[k - 1] += gc;
            }
        });
    }

    // --- nonlinearities ---

    Var softmax(Var v) {
        std::vector<double> out = softmax_values(val(v));
        return push(std::move(out), {v.id}, [](Tape& t, Node& n) {
            Node& nv = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            double inner = 0.0;
            for (std::size_t i = 0; i < n.grad.size(); ++i) inner += n.grad[i] * n.value[i];
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                nv.grad[i] += n.value[i] * (n.grad[i] - inner);
        });
    }

    Var sigmoid(Var v) {
        std::vector<double> out(len(v));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(val(v)[i]);
        return push(std::move(out), {v.id}, [](Tape& t, Node& n) {
            Node& nv = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                nv.grad[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
        });
    }

    Var leaky_relu(Var v, double slope) {
        if (!(slope > 0.0 && slope < 1.0)) throw input_error("leaky_relu: slope must be in (0, 1)");
        std::vector<double> out(len(v));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = leaky_relu_scalar(val(v)[i], slope);
        return push(std::move(out), {v.id}, [slope](Tape& t, Node& n) {
            Node& nv = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                nv.grad[i] += (nv.value[i] >= 0.0 ? 1.0 : slope) * n.grad[i];
        });
    }

    // max(0, x), elementwise; subgradient 0 at the kink.
    Var hinge(Var v) {
        std::vector<double> out(len(v));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, val(v)[i]);
        return push(std::move(out), {v.id}, [](Tape& t, Node& n) {
            Node& nv = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                if (nv.value[i] > 0.0) nv.grad[i] += n.grad[i];
        });
    }

    // Elementwise custom op: f(value) with user-supplied derivative.
    Var apply_elementwise(Var v, const std::function<double(double)>& f,
                          const std::function<double(double)>& dfdx) {
        std::vector<double> out(len(v));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(val(v)[i]);
        return push(std::move(out), {v.id}, [dfdx](Tape& t, Node& n) {
            Node& nv = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                nv.grad[i] += dfdx(nv.value[i]) * n.grad[i];
        });
    }

    Var sq_l2(Var a, Var b) {
        check_same_len(a, b, "sq_l2");
        double s = 0.0;
        for (std::size_t i = 0; i < len(a); ++i) {
            double d = val(a)[i] - val(b)[i];
            s += d * d;
        }
        return push({s}, {a.id, b.id}, [](Tape& t, Node& n) {
            Node& na = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nb = t.nodes_[static_cast<std::size_t>(n.inputs[1])];
            double g = n.grad[0];
            for (std::size_t i = 0; i < na.value.size(); ++i) {
                double d = 2.0 * (na.value[i] - nb.value[i]) * g;
                na.grad[i] += d;
                nb.grad[i] -= d;
            }
        });
    }

    Var sum(Var v) {
        double s = 0.0;
        for (double x : val(v)) s += x;
        return push({s}, {v.id}, [](Tape& t, Node& n) {
            Node& nv = t.nodes_[static_cast<std::size_t>(n.inputs[0])];
            for (std::size_t i = 0; i < nv.grad.size(); ++i) nv.grad[i] += n.grad[0];
        });
    }

    // --- access / backward ---

    const std::vector<double>& value_of(Var v) const { return val(v); }

    double scalar_value(Var v) const {
        if (len(v) != 1) throw shape_error("scalar_value: var is not a scalar");
        return val(v)[0];
    }

    std::size_t node_count() const { return nodes_.size(); }

    // Reverse sweep from a scalar output. Parameter gradients are ADDED into
    // the bound store slots, so repeated calls accumulate unless the store
    // grads are zeroed in between.
    void backward(Var output, ParamStore& store) {
        if (len(output) != 1) throw shape_error("backward: output is not a scalar");
        for (Node& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
        nodes_[static_cast<std::size_t>(output.id)].grad[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backward) n.backward(*this, n);
        }
        for (const Binding& b : bindings_) {
            if (b.store != &store)
                throw input_error("backward: tape is bound to a different ParamStore");
            Array& g = store.grad(b.name);
            const Node& n = nodes_[static_cast<std::size_t>(b.node)];
            for (std::size_t i = 0; i < b.length; ++i) g.data[b.offset + i] += n.grad[i];
        }
    }

private:
    struct Node {
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<int> inputs;
        std::function<void(Tape&, Node&)> backward;
    };

    struct Binding {
        int node;
        ParamStore* store;
        std::string name;
        std::size_t offset;
        std::size_t length;
    };

    Var push(std::vector<double> value, std::vector<int> inputs,
             std::function<void(Tape&, Node&)> backward) {
        Node n;
        n.grad.assign(value.size(), 0.0);
        n.value = std::move(value);
        n.inputs = std::move(inputs);
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    const std::vector<double>& val(Var v) const {
        return nodes_[static_cast<std::size_t>(v.id)].value;
    }
    std::size_t len(Var v) const { return val(v).size(); }

    void check_same_len(Var a, Var b, const std::string& who) const {
        if (len(a) != len(b))
            throw shape_error(who + ": length mismatch " + std::to_string(len(a)) + " vs " +
                              std::to_string(len(b)));
    }

    std::vector<Node> nodes_;
    std::vector<Binding> bindings_;
};

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
    bool pass = false;
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    double tol = 0.0;
};

// Compares tape gradients of f against central finite differences.
// Relative error uses max(|analytic|, |numeric|, scale_floor) as the
// denominator, so tiny gradients are held to an absolute standard.
inline GradCheckReport grad_check(const std::function<Var(Tape&, ParamStore&)>& f,
                                  ParamStore& store, double tol, double h = 1e-5,
                                  double scale_floor = 1.0) {
    if (!(tol > 0.0)) throw input_error("grad_check: tol must be positive");

    auto eval = [&](const std::string& current_param) -> double {
        Tape tape;
        Var out = f(tape, store);
        double v = tape.scalar_value(out);
        if (!std::isfinite(v))
            throw numeric_error("grad_check: non-finite value while perturbing parameter " +
                                (current_param.empty() ? std::string("<none>") : current_param));
        return v;
    };

    // Analytic pass.
    std::map<std::string, Array> analytic;
    {
        Tape tape;
        Var out = f(tape, store);
        if (!std::isfinite(tape.scalar_value(out)))
            throw numeric_error("grad_check: non-finite loss at evaluation point");
        store.zero_grads();
        tape.backward(out, store);
        for (const std::string& name : store.names()) analytic.emplace(name, store.grad(name));
    }

    GradCheckReport report;
    report.tol = tol;
    for (const std::string& name : store.names()) {
        Array& value = store.value(name);
        const Array& a = analytic.at(name);
        for (std::size_t i = 0; i < value.size(); ++i) {
            double saved = value.data[i];
            value.data[i] = saved + h;
            double fp = eval(name);
            value.data[i] = saved - h;
            double fm = eval(name);
            value.data[i] = saved;
            double numeric = (fp - fm) / (2.0 * h);
            double denom = std::max({std::fabs(a.data[i]), std::fabs(numeric), scale_floor});
            double rel = std::fabs(a.data[i] - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = name;
                report.worst_index = i;
                report.worst_analytic = a.data[i];
                report.worst_numeric = numeric;
            }
        }
    }
    report.pass = report.max_rel_error <= tol;
    return report;
}

}  // namespace patentkg
