/**
 * Seeded convolutional encoders that map RGB frames to 256-D embeddings.
 *
 * tactile_resnet50: a ResNet-50 backbone with the classification head
 * truncated, global average pooling feeding a frozen 256-D linear layer.
 *
 * visual_resnet18_gn: a ResNet-18 backbone with every BatchNorm replaced by
 * GroupNorm (8 groups), global pooling and the fully connected head removed,
 * a spatial softmax turning the final feature map into per-channel keypoint
 * coordinates, and a frozen 256-D linear layer on top.
 *
 * All weights are drawn from seeded initializers and frozen, so extraction
 * is a pure function of (seed, image): the same frames always produce the
 * same embeddings, in any batch size, in any process. A pretrained weight
 * file can be loaded over the seeded values when one is available.
 */

import * as tf from '@tensorflow/tfjs';

import { GroupNorm, GROUPNORM_GROUPS, SpatialSoftmax } from './layers.js';

export const EMBED_DIM = 256;

/** Fixed weight seed: the published constant every extractor build shares. */
export const WEIGHT_SEED = 1309;

export type EncoderKind = 'tactile_resnet50' | 'visual_resnet18_gn';

export const ENCODER_KINDS: readonly EncoderKind[] = [
  'tactile_resnet50',
  'visual_resnet18_gn',
];

/** Hands out one derived seed per layer so weights are order-stable. */
class SeedStream {
  private counter = 0;

  constructor(private readonly base: number) {}

  next(): number {
    return this.base * 9973 + this.counter++;
  }
}

type Sym = tf.SymbolicTensor;

function conv(
  x: Sym,
  filters: number,
  kernel: number,
  stride: number,
  seeds: SeedStream,
): Sym {
  return tf.layers
    .conv2d({
      filters,
      kernelSize: kernel,
      strides: stride,
      padding: 'same',
      useBias: false,
      kernelInitializer: tf.initializers.heNormal({ seed: seeds.next() }),
      trainable: false,
    })
    .apply(x) as Sym;
}

function batchNorm(x: Sym): Sym {
  // Inference mode only: the frozen moving statistics make this a fixed
  // per-channel affine map, independent of batch composition.
  return tf.layers.batchNormalization({ trainable: false }).apply(x) as Sym;
}

function groupNorm(x: Sym): Sym {
  return new GroupNorm({ groups: GROUPNORM_GROUPS }).apply(x) as Sym;
}

function relu(x: Sym): Sym {
  return tf.layers.activation({ activation: 'relu' }).apply(x) as Sym;
}

type NormFn = (x: Sym) => Sym;

/** ResNet-50 bottleneck: 1x1 reduce, 3x3 (carries the stride), 1x1 expand. */
function bottleneck(
  x: Sym,
  filters: number,
  stride: number,
  seeds: SeedStream,
  norm: NormFn,
): Sym {
  const expanded = 4 * filters;
  let out = relu(norm(conv(x, filters, 1, 1, seeds)));
  out = relu(norm(conv(out, filters, 3, stride, seeds)));
  out = norm(conv(out, expanded, 1, 1, seeds));
  let shortcut = x;
  if (stride !== 1 || x.shape[x.shape.length - 1] !== expanded) {
    shortcut = norm(conv(x, expanded, 1, stride, seeds));
  }
  return relu(tf.layers.add().apply([out, shortcut]) as Sym);
}

/** ResNet-18 basic block: two 3x3 convs, first one carries the stride. */
function basicBlock(
  x: Sym,
  filters: number,
  stride: number,
  seeds: SeedStream,
  norm: NormFn,
): Sym {
  let out = relu(norm(conv(x, filters, 3, stride, seeds)));
  out = norm(conv(out, filters, 3, 1, seeds));
  let shortcut = x;
  if (stride !== 1 || x.shape[x.shape.length - 1] !== filters) {
    shortcut = norm(conv(x, filters, 1, stride, seeds));
  }
  return relu(tf.layers.add().apply([out, shortcut]) as Sym);
}

function stem(x: Sym, seeds: SeedStream, norm: NormFn): Sym {
  const out = relu(norm(conv(x, 64, 7, 2, seeds)));
  return tf.layers
    .maxPooling2d({ poolSize: 3, strides: 2, padding: 'same' })
    .apply(out) as Sym;
}

function embeddingHead(x: Sym, seeds: SeedStream): Sym {
  return tf.layers
    .dense({
      units: EMBED_DIM,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seeds.next() }),
      biasInitializer: tf.initializers.randomUniform({
        minval: -0.05,
        maxval: 0.05,
        seed: seeds.next(),
      }),
      trainable: false,
    })
    .apply(x) as Sym;
}

/** ResNet-50, classification head truncated, GAP -> frozen 256-D linear. */
export function buildTactileResnet50(seed: number = WEIGHT_SEED): tf.LayersModel {
  const seeds = new SeedStream(seed);
  const input = tf.input({ shape: [null, null, 3] });
  let x = stem(input, seeds, batchNorm);
  const stages: Array<[number, number]> = [
    [64, 3],
    [128, 4],
    [256, 6],
    [512, 3],
  ];
  stages.forEach(([filters, blocks], stage) => {
    for (let i = 0; i < blocks; i++) {
      const stride = stage > 0 && i === 0 ? 2 : 1;
      x = bottleneck(x, filters, stride, seeds, batchNorm);
    }
  });
  x = tf.layers.globalAveragePooling2d({}).apply(x) as Sym;
  x = embeddingHead(x, seeds);
  return tf.model({ inputs: input, outputs: x, name: 'tactile_resnet50' });
}

/** ResNet-18 with GroupNorm, spatial softmax -> frozen 256-D linear. */
export function buildVisualResnet18Gn(seed: number = WEIGHT_SEED): tf.LayersModel {
  const seeds = new SeedStream(seed);
  const input = tf.input({ shape: [null, null, 3] });
  let x = stem(input, seeds, groupNorm);
  const stages: Array<[number, number]> = [
    [64, 2],
    [128, 2],
    [256, 2],
    [512, 2],
  ];
  stages.forEach(([filters, blocks], stage) => {
    for (let i = 0; i < blocks; i++) {
      const stride = stage > 0 && i === 0 ? 2 : 1;
      x = basicBlock(x, filters, stride, seeds, groupNorm);
    }
  });
  x = new SpatialSoftmax().apply(x) as Sym;
  x = embeddingHead(x, seeds);
  return tf.model({ inputs: input, outputs: x, name: 'visual_resnet18_gn' });
}

export function buildEncoder(kind: EncoderKind, seed: number = WEIGHT_SEED): tf.LayersModel {
  switch (kind) {
    case 'tactile_resnet50':
      return buildTactileResnet50(seed);
    case 'visual_resnet18_gn':
      return buildVisualResnet18Gn(seed);
    default:
      throw new Error(`unknown encoder ${kind as string}`);
  }
}
