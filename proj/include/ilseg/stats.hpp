#pragma once

#include <utility>
#include <vector>

#include "ilseg/common.hpp"

namespace ilseg {

double mean(const std::vector<double>& v);
// Population std (divide by n).
double std_population(const std::vector<double>& v);
// Sample std (divide by n-1); requires n >= 2.
double std_sample(const std::vector<double>& v);

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided Student-t tail probability with nu degrees of freedom.
double student_t_two_sided_p(double t, int64_t nu);

struct TTestResult {
    double t = 0.0;
    double p_two_sided = 1.0;
};

// Paired t-test: t = mean(d) / (std_sample(d)/sqrt(n)), p from the Student-t
// CDF with n-1 dof. Errors on n < 2 or zero-variance differences.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ilseg
