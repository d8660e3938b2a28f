import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    // CNN forward passes on the pure-JS CPU backend dominate the runtime.
    testTimeout: 300_000,
    hookTimeout: 300_000,
  },
});
