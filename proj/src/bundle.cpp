/*
 * Copyright 2026 The alk Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "alk/bundle.hpp"

#include <fstream>
#include <iterator>

namespace alk {

Bytes KeyBundle::serialize() const {
  Bytes out = dj.serialize();
  put_prefixed(out, ByteView(env.bytes));
  Bytes len;
  put_u32(len, static_cast<uint32_t>(sealed_length()));
  put_prefixed(out, len);
  return out;
}

KeyBundle KeyBundle::parse(ByteView bytes) {
  ByteReader reader(bytes);
  KeyBundle bundle{dj::PublicKey::read(reader), {}};
  ByteView env = reader.take_prefixed();
  if (env.size() != envelope::kKeyBytes) throw Error("bad envelope key field");
  std::copy(env.begin(), env.end(), bundle.env.bytes.begin());
  ByteView len = reader.take_prefixed();
  if (len.size() != 4 || get_u32(len, 0) != bundle.sealed_length()) {
    throw Error("sealed length does not match key parameters");
  }
  if (!reader.done()) throw Error("trailing bytes after key bundle");
  return bundle;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, ByteView data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace alk
