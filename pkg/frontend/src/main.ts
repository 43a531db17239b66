import { TriageApp } from './app.js';

const root = document.getElementById('app');
if (root) {
  const app = new TriageApp(root, {
    baseUrl: '',
    analyst: new URLSearchParams(window.location.search).get('analyst') ?? 'analyst',
  });
  window.addEventListener('online', () => void app.reconnect());
  void app.start();
}
