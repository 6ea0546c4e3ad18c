import { defineConfig } from "vitest/config";

// The page runs at the service origin, as in production (the service serves
// the built UI); keep in sync with tests/service-setup.ts.
export const SERVICE_PORT = 7462;

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      happyDOM: {
        url: `http://127.0.0.1:${SERVICE_PORT}`,
      },
    },
    include: ["tests/**/*.test.ts"],
    globalSetup: ["tests/service-setup.ts"],
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
