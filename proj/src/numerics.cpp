#include "soliton/numerics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

namespace soliton {

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol) {
  if (a == b) return 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  // boost terminates on a relative criterion; bound the magnitude first
  double err = 0.0;
  double l1 = 0.0;
  GK::integrate(f, a, b, 0, 0.0, &err, &l1);
  double rel = abs_tol / std::max(l1, 1e-300);
  rel = std::clamp(rel, 2e-15, 1e-3);
  double value = GK::integrate(f, a, b, 15, rel, &err, &l1);
  if (!std::isfinite(value)) {
    throw NumericalFailure("quadrature", "non-finite integral");
  }
  return value;
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double x_tol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    throw NumericalFailure("bisection", "no sign change on [" + std::to_string(lo) +
                                            ", " + std::to_string(hi) + "]");
  }
  for (int it = 0; it < max_iter && hi - lo > x_tol; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

PeriodicSpline::PeriodicSpline(std::vector<double> samples) : y_(std::move(samples)) {
  const std::size_t n = y_.size();
  if (n < 4) throw std::invalid_argument("periodic spline needs at least 4 samples");
  step_ = 2.0 * kPi / static_cast<double>(n);
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ym = y_[(i + n - 1) % n], yp = y_[(i + 1) % n];
    rhs[i] = 6.0 * (yp - 2.0 * y_[i] + ym) / (step_ * step_);
  }
  // cyclic system m[i-1] + 4 m[i] + m[i+1] = rhs, strongly diagonally dominant
  m_.assign(n, 0.0);
  double scale = 0.0;
  for (double r : rhs) scale = std::max(scale, std::abs(r));
  for (int sweep = 0; sweep < 200; ++sweep) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double next = (rhs[i] - m_[(i + n - 1) % n] - m_[(i + 1) % n]) / 4.0;
      change = std::max(change, std::abs(next - m_[i]));
      m_[i] = next;
    }
    if (change <= 1e-16 * (scale + 1e-300)) break;
  }
}

void PeriodicSpline::locate(double theta, std::size_t& i, double& t) const {
  double u = std::fmod(theta, 2.0 * kPi);
  if (u < 0) u += 2.0 * kPi;
  double s = u / step_;
  double fl = std::floor(s);
  i = static_cast<std::size_t>(fl) % y_.size();
  t = s - fl;
}

double PeriodicSpline::operator()(double theta) const {
  std::size_t i;
  double t;
  locate(theta, i, t);
  std::size_t j = (i + 1) % y_.size();
  double a = 1.0 - t, h2 = step_ * step_;
  return a * y_[i] + t * y_[j] + ((a * a * a - a) * m_[i] + (t * t * t - t) * m_[j]) * h2 / 6.0;
}

double PeriodicSpline::derivative(double theta) const {
  std::size_t i;
  double t;
  locate(theta, i, t);
  std::size_t j = (i + 1) % y_.size();
  double a = 1.0 - t;
  return (y_[j] - y_[i]) / step_ +
         ((-(3.0 * a * a - 1.0)) * m_[i] + (3.0 * t * t - 1.0) * m_[j]) * step_ / 6.0;
}

double PeriodicSpline::second_derivative(double theta) const {
  std::size_t i;
  double t;
  locate(theta, i, t);
  std::size_t j = (i + 1) % y_.size();
  return (1.0 - t) * m_[i] + t * m_[j];
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.clear();
  weights.clear();
  auto zeros = boost::math::legendre_p_zeros<double>(n);  // nonnegative half
  for (double x : zeros) {
    double dp = boost::math::legendre_p_prime(n, x);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    if (x == 0.0) {
      nodes.push_back(0.0);
      weights.push_back(w);
    } else {
      nodes.push_back(-x);
      weights.push_back(w);
      nodes.push_back(x);
      weights.push_back(w);
    }
  }
  std::vector<std::size_t> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return nodes[a] < nodes[b]; });
  std::vector<double> xs, ws;
  for (auto k : order) {
    xs.push_back(nodes[k]);
    ws.push_back(weights[k]);
  }
  nodes = std::move(xs);
  weights = std::move(ws);
}

}  // namespace soliton
