#include "boxplain/json.hpp"

#include "boxplain/data.hpp"

namespace boxplain {
namespace {

// indent < 0 selects the single-line form.
void emit(const Json& value, std::string& out, int indent) {
  const bool compact = indent < 0;
  const auto pad = [&](int level) {
    if (!compact) out.append(static_cast<std::size_t>(level) * 2, ' ');
  };
  const auto newline = [&] {
    if (!compact) out += '\n';
  };
  const auto child = compact ? -1 : indent + 1;
  switch (value.type()) {
    case Json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      newline();
      bool first = true;
      // nlohmann objects are std::map backed, so iteration is key-sorted.
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) {
          out += ',';
          newline();
        }
        first = false;
        pad(indent + 1);
        out += Json(it.key()).dump();
        out += compact ? ":" : ": ";
        emit(it.value(), out, child);
      }
      newline();
      pad(indent);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(value.begin(), value.end(),
                                    [](const Json& v) { return v.is_primitive(); });
      out += '[';
      bool first = true;
      for (const auto& element : value) {
        if (!first) out += flat && !compact ? ", " : ",";
        first = false;
        if (!flat) {
          newline();
          pad(indent + 1);
        }
        emit(element, out, child);
      }
      if (!flat) {
        newline();
        pad(indent);
      }
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += format_number(value.get<double>());
      return;
    default:
      out += value.dump();
      return;
  }
}

}  // namespace

std::string compact_json(const Json& value) {
  std::string out;
  emit(value, out, -1);
  return out;
}

std::string canonical_json(const Json& value) {
  std::string out;
  emit(value, out, 0);
  out += '\n';
  return out;
}

}  // namespace boxplain
