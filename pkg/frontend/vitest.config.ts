import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the integration suite spawns a session server and replays a full
    // stiffen-bend-lock plan over a live socket
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
