#pragma once

#include <stdexcept>
#include <string>

namespace demri {

// Root of every exception thrown by the library. Catch this at tool
// boundaries; catch the specific types where recovery is possible.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Non-positive spacing, zero extents, or mismatched grids.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedTypeError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CorruptFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class InvalidLabelError : public Error {
 public:
  InvalidLabelError(long long code, std::size_t voxel_index)
      : Error("invalid label code " + std::to_string(code) + " at voxel " +
              std::to_string(voxel_index)),
        code_(code),
        voxel_index_(voxel_index) {}

  long long code() const noexcept { return code_; }
  std::size_t voxel_index() const noexcept { return voxel_index_; }

 private:
  long long code_;
  std::size_t voxel_index_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

class DegenerateForegroundError : public Error {
 public:
  using Error::Error;
};

class DegenerateTrainingError : public Error {
 public:
  using Error::Error;
};

// Clinical table problems: missing columns, unparsable cells, out-of-range
// values. Row and column are 1-based; zero means "not applicable".
class SchemaError : public Error {
 public:
  using Error::Error;
};

class CellError : public Error {
 public:
  CellError(std::size_t row, std::string column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace demri
