/// <reference types="vitest" />
import { defineConfig } from "vite";

// The dev server proxies /api to a locally running training server so the
// page and the API share an origin during development.
export default defineConfig({
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8733",
    },
  },
  test: {
    environment: "jsdom",
  },
});
