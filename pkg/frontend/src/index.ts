export { FormatError, Matrix, packMatrix, readMatrix, unpackMatrix, writeMatrix } from './tsm.js';
export {
  GroupNorm,
  GROUPNORM_GROUPS,
  SpatialSoftmax,
  SPATIAL_SOFTMAX_TEMPERATURE,
} from './layers.js';
export {
  buildEncoder,
  buildTactileResnet50,
  buildVisualResnet18Gn,
  EMBED_DIM,
  ENCODER_KINDS,
  EncoderKind,
  WEIGHT_SEED,
} from './model.js';
export { decodeFrame, ExtractionError, frameToTensor, listFrames, UsageError } from './images.js';
export {
  DEFAULT_BATCH,
  DEFAULT_SIZE,
  EmbedJob,
  embedFrames,
  encoderFor,
  ExtractResult,
  runExtraction,
} from './extract.js';
export { RunManifest, TOOL_VERSION, writeRunManifest } from './manifest.js';
