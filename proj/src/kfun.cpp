#include "hsgt/kfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "hsgt/error.hpp"

namespace hsgt::kfun {

std::string to_string(FunctionClass c) {
  switch (c) {
    case FunctionClass::Zero: return "zero";
    case FunctionClass::NotK: return "not-K";
    case FunctionClass::PositiveDefinite: return "positive-definite";
    case FunctionClass::ClassK: return "K";
    case FunctionClass::ClassKInfinity: return "K-infinity";
    case FunctionClass::Unverified: return "unverified";
  }
  return "unverified";
}

std::vector<double> Grid::values() const {
  if (points < 2 || !(lo > 0) || !(hi > lo)) throw Error("invalid grid");
  std::vector<double> out(points);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

struct KFun::Node {
  virtual ~Node() = default;
  virtual double value(double s) const = 0;
  virtual Jet jet(double s) const = 0;
  virtual std::string describe() const = 0;
  virtual bool is_zero() const { return false; }

  const Classification& classification(const KFun& self) const {
    std::call_once(once_, [&] {
      try {
        cached_ = classify(self);
      } catch (const DomainError& e) {
        cached_.cls = FunctionClass::Unverified;
        cached_.reason = e.what();
      }
    });
    return cached_;
  }

 private:
  mutable std::once_flag once_;
  mutable Classification cached_;
};

namespace {

using Node = KFun::Node;

Jet numeric_jet(const std::function<double(double)>& f, double s) {
  const double h = 1e-7 * std::max(std::abs(s), 1e-6);
  const double lo = std::max(0.0, s - h);
  const double hi = s + h;
  return {f(s), (f(hi) - f(lo)) / (hi - lo), true};
}

struct ZeroNode final : Node {
  double value(double) const override { return 0.0; }
  Jet jet(double) const override { return {0.0, 0.0, false}; }
  std::string describe() const override { return "0"; }
  bool is_zero() const override { return true; }
};

struct ExprNode final : Node {
  ExprNode(expr::Expr e, std::string var) : compiled(e, {var}), var_name(std::move(var)) {}
  double value(double s) const override { return compiled(std::span<const double>(&s, 1)); }
  Jet jet(double s) const override {
    const double one = 1.0;
    return compiled.jet(std::span<const double>(&s, 1), std::span<const double>(&one, 1));
  }
  std::string describe() const override { return compiled.source().render(); }
  expr::CompiledExpr compiled;
  std::string var_name;
};

struct ComposeNode final : Node {
  ComposeNode(KFun f, KFun g) : outer(std::move(f)), inner(std::move(g)) {}
  double value(double s) const override { return outer(inner(s)); }
  Jet jet(double s) const override {
    const Jet gi = inner.jet(s);
    const Jet fo = outer.jet(gi.v);
    return {fo.v, fo.d * gi.d, fo.kink || gi.kink};
  }
  std::string describe() const override { return "(" + outer.describe() + ") o (" + inner.describe() + ")"; }
  KFun outer, inner;
};

struct InverseNode final : Node {
  explicit InverseNode(KFun f) : fn(std::move(f)) {}
  double value(double y) const override { return invert(fn, y); }
  Jet jet(double y) const override {
    const double r = invert(fn, y);
    const Jet j = fn.jet(r);
    if (j.d == 0.0) return {r, std::numeric_limits<double>::infinity(), true};
    return {r, 1.0 / j.d, j.kink};
  }
  std::string describe() const override { return "inv(" + fn.describe() + ")"; }
  KFun fn;
};

struct ExtremeNode final : Node {
  ExtremeNode(std::vector<KFun> fs, bool is_max) : parts(std::move(fs)), want_max(is_max) {}
  double value(double s) const override {
    double best = parts.front()(s);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const double v = parts[i](s);
      best = want_max ? std::max(best, v) : std::min(best, v);
    }
    return best;
  }
  Jet jet(double s) const override {
    std::vector<Jet> js;
    js.reserve(parts.size());
    for (const auto& p : parts) js.push_back(p.jet(s));
    double best = js.front().v;
    for (const auto& j : js) best = want_max ? std::max(best, j.v) : std::min(best, j.v);
    Jet out{best, 0.0, false};
    bool first = true;
    for (const auto& j : js) {
      if (!tied(j.v, best)) continue;
      out.kink = out.kink || j.kink;
      if (first) {
        out.d = j.d;
        first = false;
      } else if (j.d != out.d) {
        out.kink = true;
        out.d = want_max ? std::max(out.d, j.d) : std::min(out.d, j.d);
      }
    }
    return out;
  }
  std::string describe() const override {
    std::string out = want_max ? "max{" : "min{";
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += ", ";
      out += parts[i].describe();
    }
    return out + "}";
  }
  std::vector<KFun> parts;
  bool want_max;
};

struct TableNode final : Node {
  TableNode(std::vector<double> x, std::vector<double> y, std::string d)
      : xs(std::move(x)), ys(std::move(y)), text(std::move(d)) {
    if (xs.size() != ys.size() || xs.empty()) throw DimensionError("table needs matching nonempty nodes");
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!(xs[i] > 0) && !(i == 0 && xs[i] == 0.0)) throw Error("table nodes must be positive");
      if (i > 0 && !(xs[i] > xs[i - 1])) throw Error("table nodes must increase");
    }
    if (xs.front() > 0.0) {
      xs.insert(xs.begin(), 0.0);
      ys.insert(ys.begin(), 0.0);
    }
    if (xs.size() < 2) throw Error("table needs a positive node");
  }

  // Index of the segment [xs[i], xs[i+1]] used for s (last segment extends).
  std::size_t segment(double s) const {
    auto it = std::upper_bound(xs.begin(), xs.end(), s);
    std::size_t i = static_cast<std::size_t>(it - xs.begin());
    if (i == 0) return 0;
    return std::min(i - 1, xs.size() - 2);
  }
  double slope(std::size_t i) const { return (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]); }

  double value(double s) const override {
    const std::size_t i = segment(s);
    return ys[i] + slope(i) * (s - xs[i]);
  }
  Jet jet(double s) const override {
    const std::size_t i = segment(s);
    Jet out{ys[i] + slope(i) * (s - xs[i]), slope(i), false};
    if (i > 0 && s == xs[i] && slope(i - 1) != slope(i)) out.kink = true;
    return out;
  }
  std::string describe() const override { return text; }

  std::vector<double> xs, ys;
  std::string text;
};

struct CustomNode final : Node {
  CustomNode(std::function<double(double)> v, std::string d, std::function<Jet(double)> j)
      : fn(std::move(v)), jet_fn(std::move(j)), text(std::move(d)) {}
  double value(double s) const override { return fn(s); }
  Jet jet(double s) const override { return jet_fn ? jet_fn(s) : numeric_jet(fn, s); }
  std::string describe() const override { return text; }
  std::function<double(double)> fn;
  std::function<Jet(double)> jet_fn;
  std::string text;
};

std::shared_ptr<const Node> zero_node() {
  static const auto z = std::make_shared<const ZeroNode>();
  return z;
}

}  // namespace

KFun::KFun() : node_(zero_node()) {}
KFun::KFun(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

KFun KFun::zero() { return KFun(); }

KFun KFun::from_expr(const expr::Expr& e, const std::string& var) {
  if (e.op() == expr::Op::Const && e.constant_value() == 0.0) return zero();
  return KFun(std::make_shared<const ExprNode>(e, var));
}

KFun KFun::parse(std::string_view text, const std::string& var) {
  return from_expr(expr::parse_expr(text, {var}), var);
}

KFun KFun::linear(double slope) {
  if (slope == 0.0) return zero();
  using expr::Expr;
  return from_expr(Expr::binary(expr::Op::Mul, Expr::constant(slope), Expr::variable("s")), "s");
}

KFun KFun::table(std::vector<double> xs, std::vector<double> ys, std::string description) {
  return KFun(std::make_shared<const TableNode>(std::move(xs), std::move(ys), std::move(description)));
}

KFun KFun::custom(std::function<double(double)> value, std::string description, std::function<Jet(double)> jet) {
  return KFun(std::make_shared<const CustomNode>(std::move(value), std::move(description), std::move(jet)));
}

double KFun::operator()(double s) const { return node_->value(s); }
Jet KFun::jet(double s) const { return node_->jet(s); }
bool KFun::is_zero() const { return node_->is_zero(); }
std::string KFun::describe() const { return node_->describe(); }
const Classification& KFun::classification() const { return node_->classification(*this); }

std::optional<double> KFun::linear_slope() const {
  if (is_zero()) return 0.0;
  const auto pts = Grid::standard().values();
  const double c = (*this)(1.0);
  for (double r : pts) {
    const double v = (*this)(r);
    if (std::abs(v - c * r) > 1e-12 * std::max(std::abs(c * r), 1e-300)) return std::nullopt;
  }
  return c;
}

Classification classify(const KFun& f, const Grid& grid) {
  if (grid.points < 64 || grid.lo > 1e-6 || grid.hi < 1e6)
    throw Error("classification grid must have >= 64 points spanning [1e-6, 1e6]");
  Classification out;
  out.grid = grid;
  if (f.is_zero()) {
    out.cls = FunctionClass::Zero;
    out.reason = "identically zero";
    return out;
  }
  const double at0 = f(0.0);
  if (!(std::abs(at0) <= kZeroTolerance)) {
    out.cls = FunctionClass::NotK;
    out.reason = "f(0) = " + std::to_string(at0);
    return out;
  }
  const auto pts = grid.values();
  std::vector<double> vals;
  vals.reserve(pts.size());
  bool overflowed = false;
  for (double r : pts) {
    const double v = f(r);
    if (v == std::numeric_limits<double>::infinity()) {
      // Overflow: the function outgrows double range, which settles
      // unboundedness; only the points before it can be compared.
      overflowed = true;
      break;
    }
    if (!std::isfinite(v) || !(v > 0.0)) {
      out.cls = FunctionClass::NotK;
      out.reason = "not positive at s = " + std::to_string(r);
      return out;
    }
    vals.push_back(v);
  }
  out.sampled_sup = *std::max_element(vals.begin(), vals.end());
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (!(vals[i] > vals[i - 1])) {
      out.cls = FunctionClass::PositiveDefinite;
      out.reason = "not strictly increasing near s = " + std::to_string(pts[i]);
      return out;
    }
  }
  if (overflowed) {
    out.cls = FunctionClass::ClassKInfinity;
    out.sampled_sup = std::numeric_limits<double>::infinity();
    return out;
  }
  // Linear functions are unbounded whatever their slope.
  if (const auto slope = f.linear_slope(); slope && *slope > 0) {
    out.cls = FunctionClass::ClassKInfinity;
    out.reason = "linear";
    return out;
  }
  // Unboundedness probe: continue the grid by decades up to 1e12.
  double last = vals.back();
  double r = grid.hi;
  while (r < kUnboundedProbeMax) {
    r = std::min(r * 10.0, kUnboundedProbeMax);
    const double v = f(r);
    if (!std::isfinite(v)) break;
    if (!(v > last)) {
      out.cls = FunctionClass::ClassK;
      out.sampled_sup = std::max(out.sampled_sup, v);
      out.reason = "growth stalls beyond grid";
      return out;
    }
    last = v;
    out.sampled_sup = std::max(out.sampled_sup, v);
    if (v > kUnboundedThreshold) {
      out.cls = FunctionClass::ClassKInfinity;
      return out;
    }
  }
  out.cls = FunctionClass::ClassK;
  out.reason = "bounded by " + std::to_string(out.sampled_sup) + " up to 1e12";
  return out;
}

KFun compose(const KFun& f, const KFun& g) {
  if (f.is_zero() || g.is_zero()) return KFun::zero();
  return KFun(std::make_shared<const ComposeNode>(f, g));
}

KFun compose(std::initializer_list<KFun> chain) {
  if (chain.size() == 0) throw Error("empty composition");
  auto it = std::rbegin(chain);
  KFun acc = *it++;
  for (; it != std::rend(chain); ++it) acc = compose(*it, acc);
  return acc;
}

double invert(const KFun& f, double y, std::optional<double> bracket_hint) {
  if (!(y >= 0.0)) throw RangeError("cannot invert at negative value");
  if (y == 0.0) return 0.0;
  if (f.is_zero()) throw RangeError("zero function has no inverse");

  double hi = bracket_hint && *bracket_hint > 0 ? *bracket_hint : 1.0;
  double fhi = f(hi);
  if (fhi < y) {
    while (fhi < y) {
      if (hi >= kUnboundedProbeMax) {
        const auto& c = f.classification();
        if (c.cls == FunctionClass::ClassK)
          throw RangeError("value " + std::to_string(y) + " above the range of a bounded class-K function");
        throw RangeError("no bracket for value " + std::to_string(y) + " within [0, 1e12]");
      }
      hi = std::min(hi * 2.0, kUnboundedProbeMax);
      fhi = f(hi);
    }
  } else {
    // Shrink until the lower half no longer reaches y.
    while (hi > std::numeric_limits<double>::min() && f(hi * 0.5) >= y) hi *= 0.5;
  }
  double lo = hi * 0.5;
  for (int it = 0; it < 2200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  const double flo = f(lo);
  return (y - flo) < (f(hi) - y) ? lo : hi;
}

KFun inverse(const KFun& f) {
  if (f.is_zero()) throw RangeError("zero function has no inverse");
  if (auto* inv = dynamic_cast<const InverseNode*>(f.node().get())) return inv->fn;
  // c*s inverts in closed form; this keeps compositions of linear gains cheap.
  if (auto* e = dynamic_cast<const ExprNode*>(f.node().get())) {
    const auto& src = e->compiled.source();
    if (src.op() == expr::Op::Mul && src.args()[0].op() == expr::Op::Const && src.args()[1].op() == expr::Op::Var &&
        src.args()[0].constant_value() > 0)
      return KFun::linear(1.0 / src.args()[0].constant_value());
  }
  return KFun(std::make_shared<const InverseNode>(f));
}

KFun pointwise_max(const std::vector<KFun>& fs) {
  if (fs.empty()) throw Error("pointwise_max of an empty list");
  std::vector<KFun> parts;
  for (const auto& f : fs)
    if (!f.is_zero()) parts.push_back(f);
  if (parts.empty()) return KFun::zero();
  if (parts.size() == 1) return parts.front();
  return KFun(std::make_shared<const ExtremeNode>(std::move(parts), true));
}

KFun pointwise_min(const std::vector<KFun>& fs) {
  if (fs.empty()) throw Error("pointwise_min of an empty list");
  for (const auto& f : fs)
    if (f.is_zero()) return KFun::zero();
  if (fs.size() == 1) return fs.front();
  return KFun(std::make_shared<const ExtremeNode>(fs, false));
}

double max_excess(const KFun& f, const KFun& g, const std::vector<double>& points) {
  double worst = -std::numeric_limits<double>::infinity();
  for (double r : points) worst = std::max(worst, f(r) - g(r));
  return worst;
}

}  // namespace hsgt::kfun
