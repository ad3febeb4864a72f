// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace countlab {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class PlacementInfeasible : public Error {
  public:
    using Error::Error;
};

/// A row that cannot be renormalized because its entries sum to zero.
class DegenerateRow : public Error {
  public:
    DegenerateRow(std::size_t head, std::size_t query)
        : Error("degenerate attention row (head " + std::to_string(head) + ", query " +
                std::to_string(query) + ") sums to zero"),
          head_(head), query_(query) {}

    std::size_t head() const { return head_; }
    std::size_t query() const { return query_; }

  private:
    std::size_t head_;
    std::size_t query_;
};

class MissingBinding : public Error {
  public:
    explicit MissingBinding(std::string placeholder)
        : Error("missing binding for placeholder {" + placeholder + "}"),
          placeholder_(std::move(placeholder)) {}

    const std::string& placeholder() const { return placeholder_; }

  private:
    std::string placeholder_;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class ShapeMismatch : public Error {
  public:
    using Error::Error;
};

class MissingMask : public Error {
  public:
    using Error::Error;
};

class BadDepth : public Error {
  public:
    using Error::Error;
};

class UnknownImage : public Error {
  public:
    explicit UnknownImage(const std::string& image_id)
        : Error("unknown image id: " + image_id) {}
};

class CapabilityUnsupported : public Error {
  public:
    using Error::Error;
};

class AdapterFailure : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

}  // namespace countlab
