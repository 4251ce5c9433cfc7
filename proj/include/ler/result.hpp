#pragma once

#include <stdexcept>
#include <type_traits>
#include <utility>
#include <variant>

namespace ler {

// Error wrapper used to construct a failed Result, mirroring std::unexpected.
template <class E>
struct Unexpected {
  E error;
};

template <class E>
Unexpected(E) -> Unexpected<E>;

template <class E>
constexpr Unexpected<std::decay_t<E>> fail(E&& e) {
  return {std::forward<E>(e)};
}

class BadResultAccess : public std::logic_error {
 public:
  BadResultAccess() : std::logic_error("ler::Result: accessed value of a failed result") {}
};

// Value-or-error return type for domain outcomes that are expected to happen
// (unreachable targets, rejected commands). Precondition violations throw.
template <class T, class E>
class Result {
 public:
  using value_type = T;
  using error_type = E;

  constexpr Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  constexpr Result(Unexpected<E> u) : storage_(std::in_place_index<1>, std::move(u.error)) {}

  [[nodiscard]] constexpr bool ok() const noexcept { return storage_.index() == 0; }
  constexpr explicit operator bool() const noexcept { return ok(); }

  constexpr const T& value() const& {
    if (!ok()) throw BadResultAccess();
    return std::get<0>(storage_);
  }
  constexpr T&& value() && {
    if (!ok()) throw BadResultAccess();
    return std::get<0>(std::move(storage_));
  }
  constexpr const T& operator*() const& { return value(); }
  constexpr const T* operator->() const { return &value(); }

  constexpr const E& error() const& {
    if (ok()) throw BadResultAccess();
    return std::get<1>(storage_);
  }

  template <class U>
  constexpr T value_or(U&& fallback) const& {
    return ok() ? std::get<0>(storage_) : static_cast<T>(std::forward<U>(fallback));
  }

 private:
  std::variant<T, E> storage_;
};

}  // namespace ler
