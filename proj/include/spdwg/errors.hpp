#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace spdwg {

/// Base of every error raised by the library. `exit_code()` is the value the
/// CLI returns when the error escapes a subcommand.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class DimMismatch : public Error {
public:
    using Error::Error;
};

class BaseMismatch : public Error {
public:
    using Error::Error;
};

/// Estimated covariance is not positive definite. Carries the mean and the
/// raw covariance so callers can regularize and retry.
class SingularCovariance : public Error {
public:
    SingularCovariance(const std::string& what, Eigen::VectorXd mu, Eigen::MatrixXd raw_sigma)
        : Error(what), mu_(std::move(mu)), raw_sigma_(std::move(raw_sigma)) {}
    explicit SingularCovariance(const std::string& what) : Error(what) {}
    int exit_code() const noexcept override { return 3; }

    const Eigen::VectorXd& mu() const noexcept { return mu_; }
    const Eigen::MatrixXd& raw_sigma() const noexcept { return raw_sigma_; }

private:
    Eigen::VectorXd mu_;
    Eigen::MatrixXd raw_sigma_;
};

class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::optional<Eigen::MatrixXd> last_iterate = std::nullopt)
        : Error(what), last_iterate_(std::move(last_iterate)) {}
    int exit_code() const noexcept override { return 3; }

    /// Last iterate of the failing iteration, when there is one.
    const std::optional<Eigen::MatrixXd>& last_iterate() const noexcept { return last_iterate_; }

private:
    std::optional<Eigen::MatrixXd> last_iterate_;
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace spdwg
