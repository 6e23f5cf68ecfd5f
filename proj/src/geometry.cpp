#include "soliton/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "soliton/io.hpp"

namespace soliton {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double angle_of(Vec2 v) {
  double a = std::atan2(v.y, v.x);
  return a < 0 ? a + 2.0 * kPi : a;
}

std::shared_ptr<const PeriodicSpline> spline_of(const std::function<double(double)>& g,
                                                int samples, std::vector<double>& store) {
  store.resize(samples);
  for (int i = 0; i < samples; ++i) store[i] = g(2.0 * kPi * i / samples);
  return std::make_shared<const PeriodicSpline>(store);
}

}  // namespace

AsymptoticData AsymptoticData::cone(std::vector<Vec2> lambda, double K) {
  AsymptoticData d;
  d.mode = Mode::cone;
  d.directions = std::move(lambda);
  d.K = K;
  d.validate();
  return d;
}

AsymptoticData AsymptoticData::sphere(const std::function<double(double)>& f,
                                      const std::function<double(double)>& df,
                                      const std::function<double(double)>& d2f, int samples) {
  AsymptoticData d;
  d.mode = Mode::sphere_data;
  d.fs_ = spline_of(f, samples, d.f);
  d.dfs_ = spline_of(df, samples, d.df);
  d.d2fs_ = spline_of(d2f, samples, d.d2f);
  d.validate();
  return d;
}

void AsymptoticData::validate() const {
  if (mode == Mode::cone) {
    if (directions.size() < 2) throw std::invalid_argument("cone data needs at least 2 directions");
    for (auto v : directions) {
      if (std::abs(norm(v) - 1.0) > 1e-12) throw std::invalid_argument("direction not unit length");
    }
    bool all_equal = std::all_of(directions.begin(), directions.end(), [&](Vec2 v) {
      return norm(v - directions.front()) < 1e-12;
    });
    if (all_equal) throw std::invalid_argument("linear asymptotics (all directions equal) excluded");
    if (!(K > 0)) throw std::invalid_argument("truncation K must be positive");
  } else {
    if (f.size() < 8 || f.size() != df.size() || f.size() != d2f.size()) {
      throw std::invalid_argument("sphere data needs matching f, f', f'' samples");
    }
  }
}

double AsymptoticData::f_at(double theta) const { return (*fs_)(theta); }
double AsymptoticData::df_at(double theta) const { return (*dfs_)(theta); }
double AsymptoticData::d2f_at(double theta) const { return (*d2fs_)(theta); }

double eval_cone(std::span<const Vec2> lambda, Vec2 x) {
  if (lambda.empty()) throw std::invalid_argument("eval_cone: empty direction set");
  double v = -kInf;
  for (auto l : lambda) v = std::max(v, dot(l, x));
  return v;
}

double eval_truncated_cone(std::span<const Vec2> lambda, double K, Vec2 x) {
  if (!(K > 0)) throw std::invalid_argument("eval_truncated_cone: K must be positive");
  return std::max(eval_cone(lambda, x), norm(x) - K);
}

LipschitzField truncated_cone_field(const AsymptoticData& data) {
  if (data.mode != AsymptoticData::Mode::cone) throw std::invalid_argument("cone data expected");
  auto dirs = data.directions;
  double K = data.K;
  LipschitzField f;
  f.value = [dirs, K](Vec2 x) { return eval_truncated_cone(dirs, K, x); };
  f.gradient = [dirs, K](Vec2 x) {
    double best = -kInf;
    Vec2 g{};
    for (auto l : dirs) {
      double v = dot(l, x);
      if (v > best) {
        best = v;
        g = l;
      }
    }
    double r = norm(x);
    if (r - K > best) g = x / r;
    return g;
  };
  return f;
}

LipschitzField sphere_data_field(const AsymptoticData& data, double r_min) {
  if (data.mode != AsymptoticData::Mode::sphere_data) throw std::invalid_argument("sphere data expected");
  if (!(r_min > 0)) throw std::invalid_argument("sphere_data_field: r_min must be positive");
  auto d = std::make_shared<const AsymptoticData>(data);
  LipschitzField f;
  // inside r_min the angular part is faded out linearly; only the far field matters
  f.value = [d, r_min](Vec2 x) {
    double r = norm(x);
    double th = angle_of(x);
    double fade = std::min(1.0, r / r_min);
    return r + fade * d->f_at(th);
  };
  f.gradient = [d, r_min](Vec2 x) {
    double r = norm(x);
    if (r == 0.0) return Vec2{};
    double th = angle_of(x);
    Vec2 er = x / r, et{-er.y, er.x};
    if (r >= r_min) return er + et * (d->df_at(th) / r);
    return er * (1.0 + d->f_at(th) / r_min) + et * (d->df_at(th) / r_min);
  };
  double fmax = 0.0, dfmax = 0.0;
  for (double v : data.f) fmax = std::max(fmax, std::abs(v));
  for (double v : data.df) dfmax = std::max(dfmax, std::abs(v));
  f.lipschitz = std::max(std::hypot(1.0, dfmax / r_min), std::hypot(1.0 + fmax / r_min, dfmax / r_min));
  return f;
}

// ---------------------------------------------------------------- mollifier

namespace {
double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }
}  // namespace

Mollifier::Mollifier(int radial_nodes, int angular_nodes) {
  double unnormalized = integrate([](double r) { return bump(r * r) * 2.0 * kPi * r; }, 0.0, 1.0, 1e-15);
  norm_ = 1.0 / unnormalized;
  c4_ = norm_ * integrate(
                    [](double r) {
                      double q = 1.0 - r * r;
                      return q > 0 ? bump(r * r) * 2.0 * r / (q * q) * 2.0 * kPi * r : 0.0;
                    },
                    0.0, 1.0, 1e-15);

  std::vector<double> x, w;
  gauss_legendre(radial_nodes, x, w);
  double total = 0.0;
  for (int i = 0; i < radial_nodes; ++i) {
    double r = 0.5 * (x[i] + 1.0);
    double wr = 0.5 * w[i] * r * (2.0 * kPi / angular_nodes);
    for (int j = 0; j < angular_nodes; ++j) {
      double th = 2.0 * kPi * (j + 0.5) / angular_nodes;
      Vec2 y = unit_at(th) * r;
      double rho = bump(r * r);
      double q = 1.0 - r * r;
      pts_.push_back(y);
      mass_.push_back(wr * rho);
      dmass_.push_back(y * (wr * rho * (-2.0) / (q * q)));
      total += wr * rho;
    }
  }
  for (auto& m : mass_) m /= total;
  for (auto& g : dmass_) g = g / total;
}

const Mollifier& Mollifier::standard() {
  static const Mollifier k;
  return k;
}

MollifiedField::MollifiedField(LipschitzField base, double eps, const Mollifier& kernel)
    : base_(std::move(base)), eps_(eps), kernel_(&kernel) {
  if (!(eps > 0)) throw std::invalid_argument("mollify: eps must be positive");
  if (!base_.value || !base_.gradient) throw std::invalid_argument("mollify: incomplete field");
}

void MollifiedField::check_query(Vec2 x) const {
  if (!base_.box_half) return;
  double dx = std::abs(x.x - base_.box_center.x), dy = std::abs(x.y - base_.box_center.y);
  if (std::max(dx, dy) + eps_ > *base_.box_half) {
    throw std::domain_error("mollify: query within eps of the field's data boundary");
  }
}

double MollifiedField::value(Vec2 x) const {
  check_query(x);
  const auto& p = kernel_->points();
  const auto& m = kernel_->mass();
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += m[k] * base_.value(x - p[k] * eps_);
  return s;
}

Jet MollifiedField::jet(Vec2 x) const {
  check_query(x);
  const auto& p = kernel_->points();
  const auto& m = kernel_->mass();
  const auto& dm = kernel_->mass_grad();
  Jet j;
  double hxy = 0.0, hyx = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    Vec2 q = x - p[k] * eps_;
    Vec2 g = base_.gradient(q);
    j.value += m[k] * base_.value(q);
    j.grad += g * m[k];
    j.hxx += dm[k].x * g.x;
    hxy += dm[k].x * g.y;
    hyx += dm[k].y * g.x;
    j.hyy += dm[k].y * g.y;
  }
  j.hxx /= eps_;
  j.hyy /= eps_;
  j.hxy = 0.5 * (hxy + hyx) / eps_;
  return j;
}

// ---------------------------------------------------------------- domains

ConvexDomain ConvexDomain::disk(double R, Vec2 center) {
  if (!(R > 0)) throw std::invalid_argument("disk radius must be positive");
  ConvexDomain d;
  d.kind_ = Kind::disk;
  d.R_ = R;
  d.center_ = center;
  d.finish(720);
  d.curvature_.assign(d.angles_.size(), 1.0 / R);
  d.diameter_ = 2.0 * R;
  return d;
}

ConvexDomain ConvexDomain::polygon(std::vector<Vec2> vertices) {
  if (vertices.size() < 3) throw std::invalid_argument("polygon needs 3 vertices");
  ConvexDomain d;
  d.kind_ = Kind::polygon;
  Vec2 c{};
  for (auto v : vertices) c += v;
  d.center_ = c / static_cast<double>(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    Vec2 a = vertices[i], b = vertices[(i + 1) % vertices.size()], e = vertices[(i + 2) % vertices.size()];
    if (cross(b - a, e - b) <= 0) throw std::invalid_argument("polygon not convex and counter-clockwise");
  }
  d.vertices_ = std::move(vertices);
  d.finish(720);
  d.curvature_.assign(d.angles_.size(), 0.0);  // edges are straight; corners are not sampled
  double diam = 0.0;
  for (auto a : d.vertices_)
    for (auto b : d.vertices_) diam = std::max(diam, norm(a - b));
  d.diameter_ = diam;
  return d;
}

ConvexDomain ConvexDomain::radial(Vec2 center, std::vector<double> radii, std::vector<double> curvature) {
  for (double r : radii) {
    if (!(r > 0)) throw std::invalid_argument("radial function must be positive");
  }
  ConvexDomain d;
  d.kind_ = Kind::radial;
  d.center_ = center;
  int rays = static_cast<int>(radii.size());
  d.spline_ = std::make_shared<const PeriodicSpline>(radii);
  d.finish(rays);
  d.radii_ = std::move(radii);
  if (!curvature.empty() && curvature.size() != d.radii_.size()) {
    throw std::invalid_argument("curvature samples must match the rays");
  }
  d.curvature_ = std::move(curvature);
  auto pts = d.boundary_samples();
  double diam = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) diam = std::max(diam, norm(pts[i] - pts[j]));
  d.diameter_ = diam;
  return d;
}

void ConvexDomain::finish(int rays) {
  angles_.resize(rays);
  radii_.resize(rays);
  for (int i = 0; i < rays; ++i) {
    angles_[i] = 2.0 * kPi * i / rays;
    if (kind_ != Kind::radial) radii_[i] = radius_at(angles_[i]);
  }
}

double ConvexDomain::radius_at(double theta) const {
  switch (kind_) {
    case Kind::disk:
      return R_;
    case Kind::polygon: {
      double s = crossing(center_, unit_at(theta), kInf);
      return s;
    }
    case Kind::radial:
      return (*spline_)(theta);
  }
  return 0.0;
}

double ConvexDomain::level(Vec2 p) const {
  switch (kind_) {
    case Kind::disk:
      return norm(p - center_) - R_;
    case Kind::polygon: {
      double worst = -kInf;
      for (std::size_t i = 0; i < vertices_.size(); ++i) {
        Vec2 a = vertices_[i], b = vertices_[(i + 1) % vertices_.size()];
        Vec2 e = b - a;
        Vec2 nrm = Vec2{e.y, -e.x} / norm(e);
        worst = std::max(worst, dot(p - a, nrm));
      }
      return worst;
    }
    case Kind::radial: {
      Vec2 q = p - center_;
      return norm(q) - (*spline_)(angle_of(q));
    }
  }
  return 0.0;
}

bool ConvexDomain::contains(Vec2 p, double margin) const { return level(p) < -margin; }

double ConvexDomain::crossing(Vec2 p, Vec2 dir, double max_length) const {
  switch (kind_) {
    case Kind::disk: {
      Vec2 q = p - center_;
      double b = dot(q, dir);
      double c = dot(q, q) - R_ * R_;
      double disc = b * b - c;
      if (disc < 0) return kInf;
      double s = -b + std::sqrt(disc);
      if (s < 0) s = 0;
      return s <= max_length ? s : kInf;
    }
    case Kind::polygon: {
      double best = kInf;
      for (std::size_t i = 0; i < vertices_.size(); ++i) {
        Vec2 a = vertices_[i], b = vertices_[(i + 1) % vertices_.size()];
        Vec2 e = b - a;
        Vec2 nrm = Vec2{e.y, -e.x} / norm(e);
        double den = dot(nrm, dir);
        if (den <= 0) continue;
        double s = dot(a - p, nrm) / den;
        best = std::min(best, std::max(s, 0.0));
      }
      return best <= max_length ? best : kInf;
    }
    case Kind::radial: {
      if (level(p + dir * max_length) < 0) return kInf;
      double lo = 0.0, hi = max_length;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + max_length); ++it) {
        double mid = 0.5 * (lo + hi);
        if (level(p + dir * mid) < 0) lo = mid;
        else hi = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  return kInf;
}

double ConvexDomain::distance_to_boundary(Vec2 p) const {
  switch (kind_) {
    case Kind::disk:
      return std::abs(R_ - norm(p - center_));
    case Kind::polygon:
      return std::abs(level(p));
    case Kind::radial: {
      double best = kInf;
      for (auto b : boundary_samples()) best = std::min(best, norm(p - b));
      return best;
    }
  }
  return 0.0;
}

double ConvexDomain::area() const {
  switch (kind_) {
    case Kind::disk:
      return kPi * R_ * R_;
    case Kind::polygon: {
      double a = 0.0;
      for (std::size_t i = 0; i < vertices_.size(); ++i)
        a += cross(vertices_[i], vertices_[(i + 1) % vertices_.size()]);
      return 0.5 * a;
    }
    case Kind::radial: {
      double a = 0.0;
      for (double r : radii_) a += r * r;
      return 0.5 * a * 2.0 * kPi / static_cast<double>(radii_.size());
    }
  }
  return 0.0;
}

double ConvexDomain::max_curvature() const {
  double m = -kInf;
  for (double k : curvature_) m = std::max(m, k);
  return m;
}

double ConvexDomain::min_curvature() const {
  double m = kInf;
  for (double k : curvature_) m = std::min(m, k);
  return m;
}

std::vector<Vec2> ConvexDomain::boundary_samples() const {
  std::vector<Vec2> pts(angles_.size());
  for (std::size_t i = 0; i < angles_.size(); ++i) pts[i] = center_ + unit_at(angles_[i]) * radii_[i];
  return pts;
}

double ConvexDomain::convexity_defect() const {
  auto pts = boundary_samples();
  const std::size_t m = pts.size();
  double worst = kInf;
  for (std::size_t i = 0; i < m; ++i) {
    Vec2 a = pts[(i + m - 1) % m], b = pts[i], c = pts[(i + 1) % m];
    Vec2 u = b - a, v = c - b;
    worst = std::min(worst, cross(u, v) / (norm(u) * norm(v)));
  }
  return worst;
}

// ---------------------------------------------------------------- sublevel sets

ConvexDomain sublevel_domain(const SmoothField& field, double k, int rays) {
  if (rays < 16) throw std::invalid_argument("sublevel_domain: too few rays");
  double v0 = field.value(Vec2{});
  if (!(v0 < k)) {
    throw NumericalFailure("sublevel_domain", "origin not inside {V < k}: V(0)=" + format_number(v0));
  }
  std::vector<double> radii(rays);
  double guess = 1.0;
  for (int j = 0; j < rays; ++j) {
    double th = 2.0 * kPi * j / rays;
    Vec2 e = unit_at(th);
    auto g = [&](double r) { return field.value(e * r) - k; };
    // bracket around the previous ray's radius
    double lo = 0.0, hi = guess;
    while (g(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e7) {
        throw NumericalFailure("sublevel_domain", "level set unbounded along ray " + std::to_string(j));
      }
    }
    double probe = 0.5 * hi;
    if (probe > lo && g(probe) < 0.0) lo = probe;
    double r = bisect(g, lo, hi, 1e-11);
    radii[j] = r;
    guess = 1.05 * r;
    double slope = dot(field.gradient(e * r), e);
    if (slope < 0.5) {
      std::ostringstream msg;
      msg << "slope condition violated on ray " << j << " (theta=" << th << "): dV/dr=" << slope;
      throw NumericalFailure("sublevel_domain", msg.str());
    }
    double miss = std::abs(field.value(e * r) - k);
    if (miss > 1e-9) {
      throw NumericalFailure("sublevel_domain", "boundary value off by " + format_number(miss) +
                                                    " on ray " + std::to_string(j));
    }
  }
  ConvexDomain d = ConvexDomain::radial(Vec2{}, std::move(radii));
  d.level_k = k;
  d.set_curvature(boundary_curvature(field, d));
  if (d.convexity_defect() < -1e-9) {
    throw NumericalFailure("sublevel_domain", "boundary samples not convex at level " + format_number(k));
  }
  return d;
}

std::vector<double> boundary_curvature(const SmoothField& field, const ConvexDomain& domain) {
  auto pts = domain.boundary_samples();
  std::vector<double> kappa(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Jet j = field.jet(pts[i]);
    double gx = j.grad.x, gy = j.grad.y;
    double g = std::hypot(gx, gy);
    if (g < 0.25) {
      throw NumericalFailure("boundary_curvature", "|DV| = " + format_number(g) + " < 1/4 at sample " +
                                                      std::to_string(i));
    }
    kappa[i] = (j.hxx * gy * gy - 2.0 * j.hxy * gx * gy + j.hyy * gx * gx) / (g * g * g);
  }
  return kappa;
}

EpsilonChoice choose_epsilon(const AsymptoticData& data, double k, std::optional<double> eps_start) {
  if (data.mode != AsymptoticData::Mode::cone) throw std::invalid_argument("choose_epsilon: cone data expected");
  const int n = 2;
  double eps = eps_start.value_or(2.0 * n * Mollifier::standard().c4());
  if (!(eps > 0)) throw std::invalid_argument("choose_epsilon: eps must be positive");
  auto base = truncated_cone_field(data);
  std::string last_error;
  for (int j = 0; j < 40; ++j, eps *= 2.0) {
    MollifiedField field(base, eps);
    try {
      ConvexDomain d = sublevel_domain(field, k);
      d.epsilon = eps;
      double km = d.max_curvature();
      if (km <= 1.0) {
        EpsilonChoice out;
        out.epsilon = eps;
        out.max_curvature = km;
        out.certified_bound = 2.0 * n * Mollifier::standard().c4() / eps;
        out.doublings = j;
        out.domain = std::move(d);
        return out;
      }
    } catch (const NumericalFailure& e) {
      last_error = e.what();
      if (eps > k) break;
    }
  }
  throw NumericalFailure("choose_epsilon", "no admissible eps at level " + format_number(k) +
                                               (last_error.empty() ? "" : " (" + last_error + ")"));
}

void write_domain_files(const ConvexDomain& d, const std::string& csv_path, const std::string& json_path) {
  std::string csv = "theta,r,kappa\n";
  for (std::size_t i = 0; i < d.angles().size(); ++i) {
    double kap = d.curvature().empty() ? 0.0 : d.curvature()[i];
    csv += format_number(d.angles()[i]) + "," + format_number(d.radii()[i]) + "," + format_number(kap) + "\n";
  }
  write_text_atomic(csv_path, csv);
  nlohmann::ordered_json j;
  j["center"] = {round_significant(d.center().x), round_significant(d.center().y)};
  j["diameter"] = round_significant(d.diameter());
  j["level_k"] = round_significant(d.level_k);
  j["epsilon"] = round_significant(d.epsilon);
  j["max_kappa"] = round_significant(d.curvature().empty() ? 0.0 : d.max_curvature());
  write_text_atomic(json_path, j.dump(2) + "\n");
}

}  // namespace soliton
