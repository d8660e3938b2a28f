/**
 * Custom layers: GroupNorm (batch-independent normalization) and spatial
 * softmax (expected keypoint coordinates per channel).
 */

import * as tf from '@tensorflow/tfjs';

export const GROUPNORM_GROUPS = 8;
export const SPATIAL_SOFTMAX_TEMPERATURE = 1.0;

export interface GroupNormArgs {
  groups?: number;
  epsilon?: number;
  name?: string;
}

/**
 * Group normalization over the channel axis of NHWC inputs.
 *
 * Statistics are computed per sample over (H, W, channels-in-group), so the
 * output for one image never depends on what else is in the batch.
 */
export class GroupNorm extends tf.layers.Layer {
  static className = 'GroupNorm';

  readonly groups: number;
  readonly epsilon: number;
  private gamma!: tf.LayerVariable;
  private beta!: tf.LayerVariable;

  constructor(args: GroupNormArgs = {}) {
    super({ name: args.name });
    this.groups = args.groups ?? GROUPNORM_GROUPS;
    this.epsilon = args.epsilon ?? 1e-5;
  }

  override build(inputShape: tf.Shape | tf.Shape[]): void {
    const shape = (Array.isArray(inputShape[0]) ? inputShape[0] : inputShape) as tf.Shape;
    const channels = shape[shape.length - 1];
    if (channels == null || channels % this.groups !== 0) {
      throw new Error(`channels ${channels} not divisible into ${this.groups} groups`);
    }
    this.gamma = this.addWeight('gamma', [channels], 'float32', tf.initializers.ones());
    this.beta = this.addWeight('beta', [channels], 'float32', tf.initializers.zeros());
    this.built = true;
  }

  override computeOutputShape(inputShape: tf.Shape | tf.Shape[]): tf.Shape {
    return (Array.isArray(inputShape[0]) ? inputShape[0] : inputShape) as tf.Shape;
  }

  override call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    return tf.tidy(() => {
      const x = (Array.isArray(inputs) ? inputs[0] : inputs) as tf.Tensor4D;
      const [n, h, w, c] = x.shape;
      const grouped = tf.reshape(x, [n, h, w, this.groups, c / this.groups]);
      const { mean, variance } = tf.moments(grouped, [1, 2, 4], true);
      const normed = tf.div(tf.sub(grouped, mean), tf.sqrt(tf.add(variance, this.epsilon)));
      const flat = tf.reshape(normed, [n, h, w, c]);
      return tf.add(tf.mul(flat, this.gamma.read()), this.beta.read());
    });
  }

  override getConfig(): tf.serialization.ConfigDict {
    return { ...super.getConfig(), groups: this.groups, epsilon: this.epsilon };
  }
}
tf.serialization.registerClass(GroupNorm);

export interface SpatialSoftmaxArgs {
  temperature?: number;
  name?: string;
}

/**
 * Spatial softmax over an NHWC feature map.
 *
 * Each channel's activations are softmaxed over the H*W positions and
 * reduced to the expected (x, y) coordinate in [-1, 1], giving a 2C-wide
 * keypoint vector. A constant map softmaxes to the uniform distribution,
 * so the output stays finite for featureless inputs.
 */
export class SpatialSoftmax extends tf.layers.Layer {
  static className = 'SpatialSoftmax';

  readonly temperature: number;

  constructor(args: SpatialSoftmaxArgs = {}) {
    super({ name: args.name });
    this.temperature = args.temperature ?? SPATIAL_SOFTMAX_TEMPERATURE;
    if (!(this.temperature > 0)) {
      throw new Error(`temperature must be positive, got ${this.temperature}`);
    }
  }

  override computeOutputShape(inputShape: tf.Shape | tf.Shape[]): tf.Shape {
    const shape = (Array.isArray(inputShape[0]) ? inputShape[0] : inputShape) as tf.Shape;
    const channels = shape[shape.length - 1] as number;
    return [shape[0], 2 * channels];
  }

  override call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    return tf.tidy(() => {
      const x = (Array.isArray(inputs) ? inputs[0] : inputs) as tf.Tensor4D;
      const [n, h, w, c] = x.shape;
      // [N,H,W,C] -> [N*C, H*W] rows of per-channel spatial logits.
      const rows = tf.reshape(tf.transpose(x, [0, 3, 1, 2]), [n * c, h * w]);
      const probs = tf.softmax(tf.div(rows, this.temperature));
      const xs = w > 1 ? tf.linspace(-1, 1, w) : tf.zeros([1]);
      const ys = h > 1 ? tf.linspace(-1, 1, h) : tf.zeros([1]);
      const posX = tf.reshape(tf.tile(tf.reshape(xs, [1, w]), [h, 1]), [h * w]);
      const posY = tf.reshape(tf.tile(tf.reshape(ys, [h, 1]), [1, w]), [h * w]);
      const ex = tf.sum(tf.mul(probs, posX), 1);
      const ey = tf.sum(tf.mul(probs, posY), 1);
      // [N*C, 2] -> [N, 2C]: (x, y) pairs stay adjacent per channel.
      return tf.reshape(tf.stack([ex, ey], 1), [n, 2 * c]);
    });
  }

  override getConfig(): tf.serialization.ConfigDict {
    return { ...super.getConfig(), temperature: this.temperature };
  }
}
tf.serialization.registerClass(SpatialSoftmax);
