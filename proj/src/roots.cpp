#include "cpopt/roots.hpp"

#include <algorithm>
#include <cmath>

#include "cpopt/errors.hpp"

namespace cpopt {

RootResult bracketed_root(const std::function<double(double)>& f, double lo, double hi,
                          double f_lo, double f_hi, const RootOptions& options) {
  if (std::isnan(f_lo) || std::isnan(f_hi)) throw NonFinite("root bracket evaluates to NaN");
  if (f_lo == 0.0) return {lo, 0.0, 0, true};
  if (f_hi == 0.0) return {hi, 0.0, 0, true};
  if ((f_lo > 0.0) == (f_hi > 0.0)) throw BracketFailure("root is not bracketed");

  double a = std::min(lo, hi), b = std::max(lo, hi);
  double fa = lo < hi ? f_lo : f_hi, fb = lo < hi ? f_hi : f_lo;
  bool force_bisect = false;
  int it = 0;
  for (; it < options.max_iter; ++it) {
    const double width = b - a;
    if (width <= options.xtol_rel * std::max(std::abs(a), std::abs(b)) + options.xtol_abs) {
      break;
    }
    double c = 0.5 * (a + b);
    if (!force_bisect && std::isfinite(fa) && std::isfinite(fb)) {
      const double fp = b - fb * (b - a) / (fb - fa);
      if (fp > a && fp < b) c = fp;
    }
    if (!(c > a && c < b)) break;  // no representable interior point left
    const double fc = f(c);
    if (std::isnan(fc)) throw NonFinite("root function returned NaN");
    if (fc == 0.0 || std::abs(fc) <= options.ftol) return {c, fc, it + 1, true};
    if ((fc > 0.0) == (fa > 0.0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
      fb = fc;
    }
    force_bisect = (b - a) > 0.5 * width;
  }
  const bool pick_a = std::abs(fa) <= std::abs(fb);
  return {pick_a ? a : b, pick_a ? fa : fb, it, it < options.max_iter};
}

}  // namespace cpopt
