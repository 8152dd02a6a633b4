#ifndef IMLMM_DISTRIBUTIONS_HPP
#define IMLMM_DISTRIBUTIONS_HPP

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace imlmm::dist {

// Beyond this many degrees of freedom t and normal agree to double precision;
// boost overflows for some of them.
inline bool normal_limit(double nu) { return !(nu < 1e15); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double t_quantile(double p, double nu) {
  if (normal_limit(nu)) return normal_quantile(p);
  try {
    return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
  } catch (const std::overflow_error&) {
    return p > 0.5 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  }
}

inline double t_cdf(double t, double nu) {
  if (normal_limit(nu))
    return boost::math::cdf(boost::math::normal_distribution<double>(), t);
  return boost::math::cdf(boost::math::students_t_distribution<double>(nu), t);
}

// Upper tail P(T > t), accurate far in the tail.
inline double t_upper(double t, double nu) {
  if (normal_limit(nu))
    return boost::math::cdf(
        boost::math::complement(boost::math::normal_distribution<double>(), t));
  return boost::math::cdf(
      boost::math::complement(boost::math::students_t_distribution<double>(nu), t));
}

inline double chi2_cdf(double x, double df) {
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

}  // namespace imlmm::dist

#endif
