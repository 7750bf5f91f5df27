#pragma once

#include <cstddef>
#include <map>
#include <string>

namespace psc {

/// Outcome of a sampled inequality check. `margin` is the signed slack
/// (positive when the inequality holds); `witness` records the worst sample.
struct CertificateReport {
    std::string claim;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
    double margin = 0.0;
    std::size_t samples = 0;
    std::map<std::string, double> witness;
};

inline CertificateReport lower_bound_certificate(std::string claim, double measured, double threshold,
                                                 std::size_t samples) {
    CertificateReport c;
    c.claim = std::move(claim);
    c.measured = measured;
    c.threshold = threshold;
    c.margin = measured - threshold;
    c.passed = measured >= threshold;
    c.samples = samples;
    return c;
}

inline CertificateReport upper_bound_certificate(std::string claim, double measured, double threshold,
                                                 std::size_t samples) {
    CertificateReport c;
    c.claim = std::move(claim);
    c.measured = measured;
    c.threshold = threshold;
    c.margin = threshold - measured;
    c.passed = measured <= threshold;
    c.samples = samples;
    return c;
}

}  // namespace psc
