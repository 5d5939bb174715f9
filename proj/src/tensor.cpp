#include "tsmoco/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tsmoco {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::int64_t prod(const std::vector<int>& shape) {
    std::int64_t p = 1;
    for (int d : shape) p *= d;
    return p;
}

// An input feeds gradients back if it is a leaf parameter or was produced
// by an op on the tape that is currently recording.
bool participates(const Tensor& t) {
    return t.requires_grad() ||
           (t.tape() != nullptr && t.tape() == g_active_tape && t.node() >= 0);
}

bool any_participates(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (participates(*t)) return true;
    return false;
}

void record(Tensor& out, std::function<void()> fn) {
    Tape* t = g_active_tape;
    out.data_ptr()->tape = t;
    out.data_ptr()->node = t->record(std::move(fn));
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
    return g_active_tape != nullptr && any_participates(inputs);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

}  // namespace

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

// ---- TensorData ----

void detail::TensorData::accumulate(const double* g, std::size_t n) {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) grad[i] += g[i];
}

// ---- Tensor ----

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
    auto d = std::make_shared<detail::TensorData>();
    d->value.assign(static_cast<std::size_t>(prod(shape)), v);
    d->shape = std::move(shape);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::from(std::vector<double> data, std::vector<int> shape, bool requires_grad) {
    if (static_cast<std::int64_t>(data.size()) != prod(shape)) {
        throw ShapeError("Tensor::from: " + std::to_string(data.size()) +
                         " values do not fill shape " + shape_str(shape));
    }
    auto d = std::make_shared<detail::TensorData>();
    d->value = std::move(data);
    d->shape = std::move(shape);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v) { return from({v}, {}); }

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("item(): tensor has shape " + shape_str(shape()));
    }
    return d_->value[0];
}

void Tensor::zero_grad() {
    if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto d = std::make_shared<detail::TensorData>();
    d->shape = d_->shape;
    d->value = d_->value;
    return Tensor(std::move(d));
}

// ---- Tape ----

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

int Tape::record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
    return static_cast<int>(ops_.size()) - 1;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw GraphError("backward: loss must be a scalar tensor");
    }
    if (loss.tape() != this || loss.node() < 0) {
        throw GraphError("backward: loss was not recorded on this tape");
    }
    if (backward_done_) {
        throw GraphError("backward: tape already traversed");
    }
    backward_done_ = true;
    loss.data_ptr()->grad.assign(1, 1.0);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

NoGrad::NoGrad() : prev_(g_active_tape) { g_active_tape = nullptr; }
NoGrad::~NoGrad() { g_active_tape = prev_; }

// ---- elementwise binary ----

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
    check_same_shape(a, b, name);
    const std::size_t n = a.values().size();
    std::vector<double> out(n);
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(pa[i], pb[i]);
    Tensor o = Tensor::from(std::move(out), a.shape());
    if (should_record({&a, &b})) {
        auto ad = a.impl();
        auto bd = b.impl();
        auto od = o.impl();
        const bool na = participates(a);
        const bool nb = participates(b);
        record(o, [ad, bd, od, na, nb, bwd, n]() {
            if (od->grad.empty()) return;
            bwd(ad.get(), bd.get(), od.get(), na, nb, n);
        });
    }
    return o;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](detail::TensorData* ad, detail::TensorData* bd, detail::TensorData* od, bool na,
           bool nb, std::size_t n) {
            if (na) ad->accumulate(od->grad.data(), n);
            if (nb) bd->accumulate(od->grad.data(), n);
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](detail::TensorData* ad, detail::TensorData* bd, detail::TensorData* od, bool na,
           bool nb, std::size_t n) {
            if (na) ad->accumulate(od->grad.data(), n);
            if (nb) {
                std::vector<double> g(n);
                for (std::size_t i = 0; i < n; ++i) g[i] = -od->grad[i];
                bd->accumulate(g.data(), n);
            }
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](detail::TensorData* ad, detail::TensorData* bd, detail::TensorData* od, bool na,
           bool nb, std::size_t n) {
            std::vector<double> g(n);
            if (na) {
                for (std::size_t i = 0; i < n; ++i) g[i] = bd->value[i] * od->grad[i];
                ad->accumulate(g.data(), n);
            }
            if (nb) {
                for (std::size_t i = 0; i < n; ++i) g[i] = ad->value[i] * od->grad[i];
                bd->accumulate(g.data(), n);
            }
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](detail::TensorData* ad, detail::TensorData* bd, detail::TensorData* od, bool na,
           bool nb, std::size_t n) {
            std::vector<double> g(n);
            if (na) {
                for (std::size_t i = 0; i < n; ++i) g[i] = od->grad[i] / bd->value[i];
                ad->accumulate(g.data(), n);
            }
            if (nb) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double bv = bd->value[i];
                    g[i] = -ad->value[i] / (bv * bv) * od->grad[i];
                }
                bd->accumulate(g.data(), n);
            }
        });
}

// ---- elementwise unary ----

namespace {

template <typename Fwd, typename Dfn>
Tensor unary_op(const Tensor& a, Fwd fwd, Dfn dfn) {
    const std::size_t n = a.values().size();
    std::vector<double> out(n);
    const double* pa = a.values().data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(pa[i]);
    Tensor o = Tensor::from(std::move(out), a.shape());
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, dfn, n]() {
            if (od->grad.empty()) return;
            std::vector<double> g(n);
            for (std::size_t i = 0; i < n; ++i)
                g[i] = dfn(ad->value[i], od->value[i]) * od->grad[i];
            ad->accumulate(g.data(), n);
        });
    }
    return o;
}

}  // namespace

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(
        a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor scale(const Tensor& a, double c) {
    return unary_op(
        a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double s) { return s * (1.0 - s); });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double, double t) { return 1.0 - t * t; });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sqrt(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::sqrt(x); },
        [](double, double s) { return 0.5 / s; });
}

Tensor faulty_identity(const Tensor& a, double factor) {
    return unary_op(
        a, [](double x) { return x; }, [factor](double, double) { return factor; });
}

// ---- matmul / transpose ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: expects rank-2 tensors, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    Tensor o = Tensor::from(std::move(out), {m, n});
    if (should_record({&a, &b})) {
        auto ad = a.impl();
        auto bd = b.impl();
        auto od = o.impl();
        const bool na = participates(a);
        const bool nb = participates(b);
        record(o, [ad, bd, od, na, nb, m, k, n]() {
            if (od->grad.empty()) return;
            const double* g = od->grad.data();
            if (na) {
                // dA = dC * B^T
                std::vector<double> da(static_cast<std::size_t>(m) * k, 0.0);
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    double* darow = da.data() + static_cast<std::size_t>(i) * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* brow = bd->value.data() + static_cast<std::size_t>(kk) * n;
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                        darow[kk] = s;
                    }
                }
                ad->accumulate(da.data(), da.size());
            }
            if (nb) {
                // dB = A^T * dC
                std::vector<double> db(static_cast<std::size_t>(k) * n, 0.0);
                for (int i = 0; i < m; ++i) {
                    const double* arow = ad->value.data() + static_cast<std::size_t>(i) * k;
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    for (int kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        double* dbrow = db.data() + static_cast<std::size_t>(kk) * n;
                        for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                    }
                }
                bd->accumulate(db.data(), db.size());
            }
        });
    }
    return o;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) {
        throw ShapeError("transpose: expects rank-2 tensor, got " + shape_str(a.shape()));
    }
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(static_cast<std::size_t>(r) * c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(j) * r + i] = a.at(i, j);
    Tensor o = Tensor::from(std::move(out), {c, r});
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, r, c]() {
            if (od->grad.empty()) return;
            std::vector<double> g(static_cast<std::size_t>(r) * c);
            for (int j = 0; j < c; ++j)
                for (int i = 0; i < r; ++i)
                    g[static_cast<std::size_t>(i) * c + j] =
                        od->grad[static_cast<std::size_t>(j) * r + i];
            ad->accumulate(g.data(), g.size());
        });
    }
    return o;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || v.shape()[0] != a.cols()) {
        throw ShapeError("add_rowvec: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(v.shape()));
    }
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(static_cast<std::size_t>(r) * c);
    const double* pa = a.values().data();
    const double* pv = v.values().data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(i) * c + j] = pa[static_cast<std::size_t>(i) * c + j] + pv[j];
    Tensor o = Tensor::from(std::move(out), {r, c});
    if (should_record({&a, &v})) {
        auto ad = a.impl();
        auto vd = v.impl();
        auto od = o.impl();
        const bool na = participates(a);
        const bool nv = participates(v);
        record(o, [ad, vd, od, na, nv, r, c]() {
            if (od->grad.empty()) return;
            if (na) ad->accumulate(od->grad.data(), od->grad.size());
            if (nv) {
                std::vector<double> gv(static_cast<std::size_t>(c), 0.0);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        gv[j] += od->grad[static_cast<std::size_t>(i) * c + j];
                vd->accumulate(gv.data(), gv.size());
            }
        });
    }
    return o;
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    Tensor o = Tensor::scalar(s);
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od]() {
            if (od->grad.empty()) return;
            std::vector<double> g(ad->value.size(), od->grad[0]);
            ad->accumulate(g.data(), g.size());
        });
    }
    return o;
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    double s = 0.0;
    for (double v : a.values()) s += v;
    Tensor o = Tensor::scalar(s * inv);
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, inv]() {
            if (od->grad.empty()) return;
            std::vector<double> g(ad->value.size(), od->grad[0] * inv);
            ad->accumulate(g.data(), g.size());
        });
    }
    return o;
}

namespace {

void check_axis(const Tensor& a, int axis, const char* op) {
    if (axis < 0 || axis >= a.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(a.shape()));
    }
}

Tensor reduce_axis(const Tensor& a, int axis, bool take_mean, const char* op) {
    check_axis(a, axis, op);
    if (a.rank() == 1) return take_mean ? mean(a) : sum(a);
    if (a.rank() != 2) {
        throw ShapeError(std::string(op) + ": rank " + std::to_string(a.rank()) +
                         " not supported");
    }
    const int r = a.rows(), c = a.cols();
    const int out_n = (axis == 0) ? c : r;
    const int red_n = (axis == 0) ? r : c;
    const double w = take_mean ? 1.0 / static_cast<double>(red_n) : 1.0;
    std::vector<double> out(static_cast<std::size_t>(out_n), 0.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(axis == 0 ? j : i)] += a.at(i, j);
    for (double& v : out) v *= w;
    Tensor o = Tensor::from(std::move(out), {out_n});
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, r, c, axis, w]() {
            if (od->grad.empty()) return;
            std::vector<double> g(static_cast<std::size_t>(r) * c);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    g[static_cast<std::size_t>(i) * c + j] =
                        od->grad[static_cast<std::size_t>(axis == 0 ? j : i)] * w;
            ad->accumulate(g.data(), g.size());
        });
    }
    return o;
}

}  // namespace

Tensor sum(const Tensor& a, int axis) { return reduce_axis(a, axis, false, "sum"); }
Tensor mean(const Tensor& a, int axis) { return reduce_axis(a, axis, true, "mean"); }

// ---- softmax family ----

namespace {

// Iterates the rank-1/rank-2 tensor as `lines` lines of `n` entries with
// stride `stride`, along the requested axis.
struct LineWalk {
    int lines, n;
    std::size_t line_stride, elem_stride;
};

LineWalk line_walk(const Tensor& a, int axis, const char* op) {
    if (a.rank() == 1) return {1, a.shape()[0], 0, 1};
    if (a.rank() != 2) {
        throw ShapeError(std::string(op) + ": rank " + std::to_string(a.rank()) +
                         " not supported");
    }
    check_axis(a, axis, op);
    const int r = a.rows(), c = a.cols();
    if (axis == 1) return {r, c, static_cast<std::size_t>(c), 1};
    return {c, r, 1, static_cast<std::size_t>(c)};
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
    const LineWalk w = line_walk(a, axis, "softmax");
    std::vector<double> out(a.values().size());
    const double* pa = a.values().data();
    for (int l = 0; l < w.lines; ++l) {
        const std::size_t base = l * w.line_stride;
        double mx = pa[base];
        for (int i = 1; i < w.n; ++i) mx = std::max(mx, pa[base + i * w.elem_stride]);
        double z = 0.0;
        for (int i = 0; i < w.n; ++i) {
            const double e = std::exp(pa[base + i * w.elem_stride] - mx);
            out[base + i * w.elem_stride] = e;
            z += e;
        }
        const double inv = 1.0 / z;
        for (int i = 0; i < w.n; ++i) out[base + i * w.elem_stride] *= inv;
    }
    Tensor o = Tensor::from(std::move(out), a.shape());
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, w]() {
            if (od->grad.empty()) return;
            std::vector<double> g(ad->value.size());
            for (int l = 0; l < w.lines; ++l) {
                const std::size_t base = l * w.line_stride;
                double dot = 0.0;
                for (int i = 0; i < w.n; ++i) {
                    const std::size_t k = base + i * w.elem_stride;
                    dot += od->grad[k] * od->value[k];
                }
                for (int i = 0; i < w.n; ++i) {
                    const std::size_t k = base + i * w.elem_stride;
                    g[k] = od->value[k] * (od->grad[k] - dot);
                }
            }
            ad->accumulate(g.data(), g.size());
        });
    }
    return o;
}

Tensor log_softmax(const Tensor& a, int axis) {
    const LineWalk w = line_walk(a, axis, "log_softmax");
    std::vector<double> out(a.values().size());
    const double* pa = a.values().data();
    for (int l = 0; l < w.lines; ++l) {
        const std::size_t base = l * w.line_stride;
        double mx = pa[base];
        for (int i = 1; i < w.n; ++i) mx = std::max(mx, pa[base + i * w.elem_stride]);
        double z = 0.0;
        for (int i = 0; i < w.n; ++i) z += std::exp(pa[base + i * w.elem_stride] - mx);
        const double lz = std::log(z) + mx;
        for (int i = 0; i < w.n; ++i) {
            const std::size_t k = base + i * w.elem_stride;
            out[k] = pa[k] - lz;
        }
    }
    Tensor o = Tensor::from(std::move(out), a.shape());
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, w]() {
            if (od->grad.empty()) return;
            std::vector<double> g(ad->value.size());
            for (int l = 0; l < w.lines; ++l) {
                const std::size_t base = l * w.line_stride;
                double gsum = 0.0;
                for (int i = 0; i < w.n; ++i) gsum += od->grad[base + i * w.elem_stride];
                for (int i = 0; i < w.n; ++i) {
                    const std::size_t k = base + i * w.elem_stride;
                    g[k] = od->grad[k] - std::exp(od->value[k]) * gsum;
                }
            }
            ad->accumulate(g.data(), g.size());
        });
    }
    return o;
}

// ---- layer norm ----

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
    const bool vec = a.rank() == 1;
    if (!vec && a.rank() != 2) {
        throw ShapeError("layer_norm: rank " + std::to_string(a.rank()) + " not supported");
    }
    const int r = vec ? 1 : a.rows();
    const int d = vec ? a.shape()[0] : a.cols();
    if (gamma.rank() != 1 || gamma.shape()[0] != d || beta.rank() != 1 || beta.shape()[0] != d) {
        throw ShapeError("layer_norm: gamma/beta must be rank-1 of length " + std::to_string(d));
    }
    std::vector<double> out(a.values().size());
    std::vector<double> xhat(a.values().size());
    std::vector<double> invstd(static_cast<std::size_t>(r));
    const double* pa = a.values().data();
    const double* pg = gamma.values().data();
    const double* pb = beta.values().data();
    for (int i = 0; i < r; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += pa[base + j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = pa[base + j] - mu;
            var += c * c;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        invstd[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < d; ++j) {
            const double xh = (pa[base + j] - mu) * is;
            xhat[base + j] = xh;
            out[base + j] = xh * pg[j] + pb[j];
        }
    }
    Tensor o = Tensor::from(std::move(out), a.shape());
    if (should_record({&a, &gamma, &beta})) {
        auto ad = a.impl();
        auto gd = gamma.impl();
        auto bd = beta.impl();
        auto od = o.impl();
        const bool na = participates(a);
        const bool ng = participates(gamma);
        const bool nb = participates(beta);
        record(o, [ad, gd, bd, od, na, ng, nb, r, d, xhat = std::move(xhat),
                   invstd = std::move(invstd)]() {
            if (od->grad.empty()) return;
            const double* g = od->grad.data();
            if (nb) {
                std::vector<double> db(static_cast<std::size_t>(d), 0.0);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < d; ++j) db[j] += g[static_cast<std::size_t>(i) * d + j];
                bd->accumulate(db.data(), db.size());
            }
            if (ng) {
                std::vector<double> dg(static_cast<std::size_t>(d), 0.0);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < d; ++j) {
                        const std::size_t k = static_cast<std::size_t>(i) * d + j;
                        dg[j] += g[k] * xhat[k];
                    }
                gd->accumulate(dg.data(), dg.size());
            }
            if (na) {
                std::vector<double> dx(ad->value.size());
                for (int i = 0; i < r; ++i) {
                    const std::size_t base = static_cast<std::size_t>(i) * d;
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double gg = g[base + j] * gd->value[j];
                        m1 += gg;
                        m2 += gg * xhat[base + j];
                    }
                    m1 /= d;
                    m2 /= d;
                    const double is = invstd[static_cast<std::size_t>(i)];
                    for (int j = 0; j < d; ++j) {
                        const double gg = g[base + j] * gd->value[j];
                        dx[base + j] = is * (gg - m1 - xhat[base + j] * m2);
                    }
                }
                ad->accumulate(dx.data(), dx.size());
            }
        });
    }
    return o;
}

// ---- slicing / concatenation ----

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    if (a.rank() != 2 || r0 < 0 || r1 > a.rows() || r0 >= r1) {
        throw ShapeError("slice_rows: rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") invalid for shape " + shape_str(a.shape()));
    }
    const int c = a.cols();
    const int n = r1 - r0;
    std::vector<double> out(static_cast<std::size_t>(n) * c);
    std::copy(a.values().begin() + static_cast<std::size_t>(r0) * c,
              a.values().begin() + static_cast<std::size_t>(r1) * c, out.begin());
    Tensor o = Tensor::from(std::move(out), {n, c});
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, r0, n, c]() {
            if (od->grad.empty()) return;
            if (ad->grad.empty()) ad->grad.assign(ad->value.size(), 0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j)
                    ad->grad[static_cast<std::size_t>(r0 + i) * c + j] +=
                        od->grad[static_cast<std::size_t>(i) * c + j];
        });
    }
    return o;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (a.rank() != 2 || c0 < 0 || c1 > a.cols() || c0 >= c1) {
        throw ShapeError("slice_cols: cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for shape " + shape_str(a.shape()));
    }
    const int r = a.rows(), c = a.cols();
    const int n = c1 - c0;
    std::vector<double> out(static_cast<std::size_t>(r) * n);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = a.at(i, c0 + j);
    Tensor o = Tensor::from(std::move(out), {r, n});
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, c0, r, c, n]() {
            if (od->grad.empty()) return;
            if (ad->grad.empty()) ad->grad.assign(ad->value.size(), 0.0);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < n; ++j)
                    ad->grad[static_cast<std::size_t>(i) * c + c0 + j] +=
                        od->grad[static_cast<std::size_t>(i) * n + j];
        });
    }
    return o;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: empty part list");
    const int c = parts[0].rank() == 2 ? parts[0].cols() : -1;
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.cols() != c) {
            throw ShapeError("concat_rows: part shape " + shape_str(p.shape()) +
                             " incompatible with column count " + std::to_string(c));
        }
        total += p.rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total) * c);
    for (const Tensor& p : parts)
        out.insert(out.end(), p.values().begin(), p.values().end());
    Tensor o = Tensor::from(std::move(out), {total, c});
    bool rec = false;
    if (Tape::active() != nullptr) {
        for (const Tensor& p : parts) rec = rec || participates(p);
    }
    if (rec) {
        std::vector<std::shared_ptr<detail::TensorData>> impls;
        std::vector<bool> needed;
        for (const Tensor& p : parts) {
            impls.push_back(p.impl());
            needed.push_back(participates(p));
        }
        auto od = o.impl();
        record(o, [impls = std::move(impls), needed = std::move(needed), od]() {
            if (od->grad.empty()) return;
            std::size_t off = 0;
            for (std::size_t p = 0; p < impls.size(); ++p) {
                const std::size_t n = impls[p]->value.size();
                if (needed[p]) impls[p]->accumulate(od->grad.data() + off, n);
                off += n;
            }
        });
    }
    return o;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty part list");
    const int r = parts[0].rank() == 2 ? parts[0].rows() : -1;
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.rows() != r) {
            throw ShapeError("concat_cols: part shape " + shape_str(p.shape()) +
                             " incompatible with row count " + std::to_string(r));
        }
        total += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(r) * total);
    int coff = 0;
    for (const Tensor& p : parts) {
        const int pc = p.cols();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < pc; ++j)
                out[static_cast<std::size_t>(i) * total + coff + j] = p.at(i, j);
        coff += pc;
    }
    Tensor o = Tensor::from(std::move(out), {r, total});
    bool rec = false;
    if (Tape::active() != nullptr) {
        for (const Tensor& p : parts) rec = rec || participates(p);
    }
    if (rec) {
        std::vector<std::shared_ptr<detail::TensorData>> impls;
        std::vector<bool> needed;
        std::vector<int> widths;
        for (const Tensor& p : parts) {
            impls.push_back(p.impl());
            needed.push_back(participates(p));
            widths.push_back(p.cols());
        }
        auto od = o.impl();
        record(o, [impls = std::move(impls), needed = std::move(needed),
                   widths = std::move(widths), od, r, total]() {
            if (od->grad.empty()) return;
            int off = 0;
            for (std::size_t p = 0; p < impls.size(); ++p) {
                const int pc = widths[p];
                if (needed[p]) {
                    std::vector<double> g(static_cast<std::size_t>(r) * pc);
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < pc; ++j)
                            g[static_cast<std::size_t>(i) * pc + j] =
                                od->grad[static_cast<std::size_t>(i) * total + off + j];
                    impls[p]->accumulate(g.data(), g.size());
                }
                off += pc;
            }
        });
    }
    return o;
}

Tensor pick(const Tensor& a, const std::vector<int>& idx) {
    if (a.rank() != 2 || static_cast<int>(idx.size()) != a.rows()) {
        throw ShapeError("pick: need one index per row of " + shape_str(a.shape()));
    }
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) {
        if (idx[static_cast<std::size_t>(i)] < 0 || idx[static_cast<std::size_t>(i)] >= c) {
            throw ShapeError("pick: index " + std::to_string(idx[static_cast<std::size_t>(i)]) +
                             " out of range for " + std::to_string(c) + " columns");
        }
        out[static_cast<std::size_t>(i)] = a.at(i, idx[static_cast<std::size_t>(i)]);
    }
    Tensor o = Tensor::from(std::move(out), {r});
    if (should_record({&a})) {
        auto ad = a.impl();
        auto od = o.impl();
        record(o, [ad, od, idx, c]() {
            if (od->grad.empty()) return;
            if (ad->grad.empty()) ad->grad.assign(ad->value.size(), 0.0);
            for (std::size_t i = 0; i < idx.size(); ++i)
                ad->grad[i * c + static_cast<std::size_t>(idx[i])] += od->grad[i];
        });
    }
    return o;
}

}  // namespace tsmoco
