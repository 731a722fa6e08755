#pragma once

#include <stdexcept>
#include <string>

namespace selclust {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mixture fitting: n <= K, or a zero-variance column under a covariance
// family that needs an invertible per-column variance.
class SingularData : public Error {
 public:
  using Error::Error;
};

// Every EM start collapsed (covariance floor tripped too often).
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class SingularOmega : public Error {
 public:
  using Error::Error;
};

class EmptyCluster : public Error {
 public:
  using Error::Error;
};

class AllNonpositive : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class SearchFailed : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataLoadError : public Error {
 public:
  using Error::Error;
};

class NoRoleData : public Error {
 public:
  using Error::Error;
};

class NoWeightData : public Error {
 public:
  using Error::Error;
};

}  // namespace selclust
