import { defineConfig } from "vite";

// The dev server proxies engine calls to `causalab serve` (default port 8787)
// so the UI stays same-origin.
export default defineConfig({
  server: {
    port: 5173,
    proxy: {
      "/api": {
        target: process.env.CAUSALAB_URL ?? "http://127.0.0.1:8787",
        changeOrigin: true,
        rewrite: (path) => path.replace(/^\/api/, ""),
      },
    },
  },
  build: { outDir: "dist", sourcemap: true },
});
