#pragma once

// Method of Moving Asymptotes with the primal-dual interior-point
// solution of the convex separable subproblem:
//
//   min  f0~(x) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
//   s.t. fi~(x) - a_i z - y_i <= 0,  alpha <= x <= beta,  y, z >= 0
//
// with a0 = 1, a = 0, large c and unit d, so that y acts as an elastic slack.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace topo {

struct MMAParams {
  double move = 0.05;
  double asyinit = 0.5;
  double asyincr = 1.2;
  double asydecr = 0.7;
  double albefa = 0.1;
  double asymin = 1e-3;  // closest asymptote distance, fraction of the variable range
  double raa0 = 1e-5;
  double c = 1000.0;
  double d = 1.0;
  double epsimin = 1e-7;  // final barrier parameter of the subproblem
  int max_newton = 200;   // Newton steps per barrier level
};

class Mma {
 public:
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;

  Mma(int n, int m, MMAParams params = {}) : n_(n), m_(m), p_(params) {
    if (n < 1 || m < 1) throw std::invalid_argument("MMA needs at least one variable and one constraint");
    if (!(p_.move > 0.0 && p_.move <= 1.0)) throw std::invalid_argument("MMA move limit must be in (0, 1]");
    low_ = Vec::Zero(n);
    upp_ = Vec::Zero(n);
  }

  int iteration() const { return iter_; }

  /// One outer iteration. `dg` is m x n.
  Vec update(const Vec& x, const Vec& df, const Vec& g, const Mat& dg, const Vec& xmin, const Vec& xmax) {
    if (x.size() != n_ || df.size() != n_ || g.size() != m_ || dg.rows() != m_ || dg.cols() != n_ ||
        xmin.size() != n_ || xmax.size() != n_)
      throw std::invalid_argument("MMA update: inconsistent sizes");
    ++iter_;
    const Vec range = xmax - xmin;
    if (iter_ <= 2) {
      low_ = x - p_.asyinit * range;
      upp_ = x + p_.asyinit * range;
    } else {
      for (int j = 0; j < n_; ++j) {
        const double zzz = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
        const double factor = zzz > 0.0 ? p_.asyincr : (zzz < 0.0 ? p_.asydecr : 1.0);
        low_[j] = x[j] - factor * (xold1_[j] - low_[j]);
        upp_[j] = x[j] + factor * (upp_[j] - xold1_[j]);
        low_[j] = std::clamp(low_[j], x[j] - 10.0 * range[j], x[j] - p_.asymin * range[j]);
        upp_[j] = std::clamp(upp_[j], x[j] + p_.asymin * range[j], x[j] + 10.0 * range[j]);
      }
    }

    Vec alfa(n_), beta(n_);
    for (int j = 0; j < n_; ++j) {
      alfa[j] = std::max({low_[j] + p_.albefa * (x[j] - low_[j]), x[j] - p_.move * range[j], xmin[j]});
      beta[j] = std::min({upp_[j] - p_.albefa * (upp_[j] - x[j]), x[j] + p_.move * range[j], xmax[j]});
    }

    Vec p0(n_), q0(n_);
    Mat pm(m_, n_), qm(m_, n_);
    for (int j = 0; j < n_; ++j) {
      const double ux2 = (upp_[j] - x[j]) * (upp_[j] - x[j]);
      const double xl2 = (x[j] - low_[j]) * (x[j] - low_[j]);
      const double xmami_inv = 1.0 / std::max(range[j], 1e-5);
      double pp = std::max(df[j], 0.0), qq = std::max(-df[j], 0.0);
      double pq = 0.001 * (pp + qq) + p_.raa0 * xmami_inv;
      p0[j] = (pp + pq) * ux2;
      q0[j] = (qq + pq) * xl2;
      for (int i = 0; i < m_; ++i) {
        pp = std::max(dg(i, j), 0.0);
        qq = std::max(-dg(i, j), 0.0);
        pq = 0.001 * (pp + qq) + p_.raa0 * xmami_inv;
        pm(i, j) = (pp + pq) * ux2;
        qm(i, j) = (qq + pq) * xl2;
      }
    }
    Vec b = -g;
    for (int j = 0; j < n_; ++j) {
      const double uxinv = 1.0 / (upp_[j] - x[j]), xlinv = 1.0 / (x[j] - low_[j]);
      b += pm.col(j) * uxinv + qm.col(j) * xlinv;
    }

    Vec xnew = solve_subproblem(alfa, beta, p0, q0, pm, qm, b);
    xold2_ = iter_ >= 2 ? xold1_ : x;
    xold1_ = x;
    return xnew;
  }

 private:
  struct Point {
    Vec x, y, lam, xsi, eta, mu, s;
    double z, zet;
  };

  Vec solve_subproblem(const Vec& alfa, const Vec& beta, const Vec& p0, const Vec& q0, const Mat& pm, const Mat& qm,
                       const Vec& b) const {
    const double a0 = 1.0;
    const Vec a = Vec::Zero(m_);
    const Vec c = Vec::Constant(m_, p_.c);
    const Vec d = Vec::Constant(m_, p_.d);

    Point pt;
    pt.x = 0.5 * (alfa + beta);
    pt.y = Vec::Ones(m_);
    pt.z = 1.0;
    pt.lam = Vec::Ones(m_);
    pt.xsi = (1.0 / (pt.x - alfa).array()).max(1.0).matrix();
    pt.eta = (1.0 / (beta - pt.x).array()).max(1.0).matrix();
    pt.mu = (0.5 * c.array()).max(1.0).matrix();
    pt.zet = 1.0;
    pt.s = Vec::Ones(m_);

    const auto residual = [&](const Point& q, double epsi) {
      const Eigen::ArrayXd ux1 = (upp_ - q.x).array(), xl1 = (q.x - low_).array();
      const Vec plam = p0 + pm.transpose() * q.lam;
      const Vec qlam = q0 + qm.transpose() * q.lam;
      const Vec gvec = pm * (1.0 / ux1).matrix() + qm * (1.0 / xl1).matrix();
      Vec r(3 * n_ + 4 * m_ + 2);
      Eigen::Index o = 0;
      r.segment(o, n_) = (plam.array() / ux1.square() - qlam.array() / xl1.square()).matrix() - q.xsi + q.eta;
      o += n_;
      r.segment(o, m_) = c + d.cwiseProduct(q.y) - q.mu - q.lam;
      o += m_;
      r[o++] = a0 - q.zet - a.dot(q.lam);
      r.segment(o, m_) = gvec - a * q.z - q.y + q.s - b;
      o += m_;
      r.segment(o, n_) = (q.xsi.array() * (q.x - alfa).array() - epsi).matrix();
      o += n_;
      r.segment(o, n_) = (q.eta.array() * (beta - q.x).array() - epsi).matrix();
      o += n_;
      r.segment(o, m_) = (q.mu.array() * q.y.array() - epsi).matrix();
      o += m_;
      r[o++] = q.zet * q.z - epsi;
      r.segment(o, m_) = (q.lam.array() * q.s.array() - epsi).matrix();
      return r;
    };

    double epsi = 1.0;
    int total_steps = 0;
    double last_max = 0.0;
    while (epsi > p_.epsimin) {
      Vec res = residual(pt, epsi);
      double resnorm = res.norm();
      double resmax = res.cwiseAbs().maxCoeff();
      int steps = 0;
      while (resmax > 0.9 * epsi && steps < p_.max_newton) {
        ++steps;
        ++total_steps;
        const Eigen::ArrayXd ux1 = (upp_ - pt.x).array(), xl1 = (pt.x - low_).array();
        const Eigen::ArrayXd ux2 = ux1.square(), xl2 = xl1.square();
        const Vec plam = p0 + pm.transpose() * pt.lam;
        const Vec qlam = q0 + qm.transpose() * pt.lam;
        const Vec gvec = pm * (1.0 / ux1).matrix() + qm * (1.0 / xl1).matrix();
        Mat gg = pm;
        for (int j = 0; j < n_; ++j) gg.col(j) = pm.col(j) / ux2[j] - qm.col(j) / xl2[j];
        const Eigen::ArrayXd xa = (pt.x - alfa).array(), bx = (beta - pt.x).array();
        const Eigen::ArrayXd dpsidx = plam.array() / ux2 - qlam.array() / xl2;
        const Eigen::ArrayXd delx = dpsidx - epsi / xa + epsi / bx;
        const Eigen::ArrayXd dely = c.array() + d.array() * pt.y.array() - pt.lam.array() - epsi / pt.y.array();
        const double delz = a0 - a.dot(pt.lam) - epsi / pt.z;
        const Eigen::ArrayXd dellam = gvec.array() - a.array() * pt.z - pt.y.array() - b.array() + epsi / pt.lam.array();
        const Eigen::ArrayXd diagx =
            2.0 * (plam.array() / (ux2 * ux1) + qlam.array() / (xl2 * xl1)) + pt.xsi.array() / xa + pt.eta.array() / bx;
        const Eigen::ArrayXd diagy = d.array() + pt.mu.array() / pt.y.array();
        const Eigen::ArrayXd diaglamyi = pt.s.array() / pt.lam.array() + 1.0 / diagy;

        // Reduced (m+1) system in (dlam, dz).
        Mat aa(m_ + 1, m_ + 1);
        aa.topLeftCorner(m_, m_) = gg * (1.0 / diagx).matrix().asDiagonal() * gg.transpose();
        aa.topLeftCorner(m_, m_).diagonal() += diaglamyi.matrix();
        aa.topRightCorner(m_, 1) = a;
        aa.bottomLeftCorner(1, m_) = a.transpose();
        aa(m_, m_) = -pt.zet / pt.z;
        Vec bb(m_ + 1);
        bb.head(m_) = (dellam + dely / diagy).matrix() - gg * (delx / diagx).matrix();
        bb[m_] = delz;
        const Vec sol = aa.partialPivLu().solve(bb);
        const Vec dlam = sol.head(m_);
        const double dz = sol[m_];
        const Vec dx = (-delx / diagx).matrix() - ((gg.transpose() * dlam).array() / diagx).matrix();
        const Vec dy = (-dely / diagy + dlam.array() / diagy).matrix();
        const Vec dxsi = (-pt.xsi.array() + epsi / xa - pt.xsi.array() * dx.array() / xa).matrix();
        const Vec deta = (-pt.eta.array() + epsi / bx + pt.eta.array() * dx.array() / bx).matrix();
        const Vec dmu = (-pt.mu.array() + epsi / pt.y.array() - pt.mu.array() * dy.array() / pt.y.array()).matrix();
        const double dzet = -pt.zet + epsi / pt.z - pt.zet * dz / pt.z;
        const Vec ds = (-pt.s.array() + epsi / pt.lam.array() - pt.s.array() * dlam.array() / pt.lam.array()).matrix();

        // Step length keeping all positive quantities positive.
        double stmax = 1.0;
        const auto bound = [&](const Vec& v, const Vec& dv) {
          for (Eigen::Index i = 0; i < v.size(); ++i) stmax = std::max(stmax, -1.01 * dv[i] / v[i]);
        };
        bound(pt.y, dy);
        bound(pt.lam, dlam);
        bound(pt.xsi, dxsi);
        bound(pt.eta, deta);
        bound(pt.mu, dmu);
        bound(pt.s, ds);
        stmax = std::max({stmax, -1.01 * dz / pt.z, -1.01 * dzet / pt.zet});
        for (int j = 0; j < n_; ++j) stmax = std::max({stmax, -1.01 * dx[j] / xa[j], 1.01 * dx[j] / bx[j]});
        double step = 1.0 / stmax;

        const Point old = pt;
        double newnorm = 2.0 * resnorm;
        for (int bt = 0; bt < 50 && newnorm > resnorm; ++bt) {
          pt.x = old.x + step * dx;
          pt.y = old.y + step * dy;
          pt.z = old.z + step * dz;
          pt.lam = old.lam + step * dlam;
          pt.xsi = old.xsi + step * dxsi;
          pt.eta = old.eta + step * deta;
          pt.mu = old.mu + step * dmu;
          pt.zet = old.zet + step * dzet;
          pt.s = old.s + step * ds;
          res = residual(pt, epsi);
          newnorm = res.norm();
          step *= 0.5;
        }
        resnorm = newnorm;
        resmax = res.cwiseAbs().maxCoeff();
      }
      last_max = resmax;
      if (steps >= p_.max_newton && resmax > 1e3 * epsi) {
        std::ostringstream os;
        os << "MMA subproblem did not converge: barrier " << epsi << ", residual max " << resmax << ", norm "
           << resnorm << ", Newton steps " << total_steps << ", outer iteration " << iter_;
        throw std::runtime_error(os.str());
      }
      epsi *= 0.1;
    }
    (void)last_max;
    return pt.x.cwiseMax(alfa).cwiseMin(beta);
  }

  int n_, m_;
  MMAParams p_;
  int iter_ = 0;
  Vec low_, upp_, xold1_, xold2_;
};

}  // namespace topo
