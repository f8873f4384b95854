#pragma once

#include <stdexcept>
#include <string>

namespace raoi {

// Invalid argument or parameter outside a formula's domain.
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed packet log: unordered arrivals, delivery before arrival, ...
class StructuralError : public std::runtime_error {
public:
    explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// FCFS queue configured with lambda >= mu.
class StabilityError : public DomainError {
public:
    explicit StabilityError(const std::string& what) : DomainError(what) {}
};

// A (discipline, service, metric, order) combination with no closed form in the catalog.
class NotInCatalogError : public DomainError {
public:
    explicit NotInCatalogError(const std::string& what)
        : DomainError("not in paper: " + what) {}
};

}  // namespace raoi
