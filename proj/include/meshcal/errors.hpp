#pragma once

#include <stdexcept>
#include <string>

namespace meshcal {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A required range measurement is masked absent.
class MissingRange : public Error {
public:
  MissingRange(int i, int j)
      : Error("missing range between nodes " + std::to_string(i) + " and " +
              std::to_string(j)),
        i_(i), j_(j) {}
  int i() const { return i_; }
  int j() const { return j_; }

private:
  int i_;
  int j_;
};

// Frame anchors coincide (zero baseline) or are otherwise unusable.
class DegenerateFrame : public Error {
public:
  using Error::Error;
};

// Trilateration root is imaginary: the two circles do not intersect.
class ImaginaryRoot : public Error {
public:
  using Error::Error;
};

class InsufficientReferences : public Error {
public:
  using Error::Error;
};

class NoConvergence : public Error {
public:
  using Error::Error;
};

// Every grid cell ended up with zero probability mass.
class AllMassZero : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class LayoutInfeasible : public Error {
public:
  using Error::Error;
};

class InsufficientData : public Error {
public:
  using Error::Error;
};

class NoTruth : public Error {
public:
  using Error::Error;
};

}  // namespace meshcal
