/* Copyright 2026 The rcfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef RCFUSE_DETECTION_H_
#define RCFUSE_DETECTION_H_

#include <string>

#include "rcfuse/geometry.h"
#include "rcfuse/proposals.h"

namespace rcfuse {

struct Detection {
  Box2D box;
  std::string class_name;
  double score = 0.0;
  double distance = 0.0;  // meters
  ProposalSource source = ProposalSource::kImage;
};

struct GroundTruth2D {
  Box2D box;
  std::string class_name;
  double distance = 0.0;  // meters
};

}  // namespace rcfuse

#endif  // RCFUSE_DETECTION_H_
